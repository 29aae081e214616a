#include "vhdlx/merge.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include <nlohmann/json.hpp>

namespace vhdlx::merge {
namespace {

constexpr std::string_view kMagic{"TMAP1\0", 6};

std::string shape_string(const std::vector<std::int64_t>& shape) {
    std::string s = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) s += ",";
        s += std::to_string(shape[i]);
    }
    return s + "]";
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::string_view in) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(in[i]);
    return v;
}

void put_f32(std::string& out, float f) {
    const auto bits = std::bit_cast<std::uint32_t>(f);
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

float get_f32(const char* p) {
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) bits = (bits << 8) | static_cast<unsigned char>(p[i]);
    return std::bit_cast<float>(bits);
}

} // namespace

std::size_t Tensor::element_count() const {
    std::size_t n = 1;
    for (auto d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

void TensorMap::validate() const {
    for (const auto& [name, t] : entries) {
        if (name.empty() || name == "__metadata__") throw Error("InvalidTensor", "bad tensor name '" + name + "'");
        for (auto d : t.shape)
            if (d < 0) throw Error("InvalidTensor", name + ": negative dimension");
        if (t.data.size() != t.element_count())
            throw Error("InvalidTensor", name + ": data length does not match shape " + shape_string(t.shape));
        for (float f : t.data)
            if (!std::isfinite(f)) throw Error("InvalidTensor", name + ": non-finite value");
    }
}

void MergeSpec::validate() const {
    if (!(t >= 0.0 && t <= 1.0)) throw Error("InvalidSpec", "t must be in [0, 1]");
    if (!(epsilon > 0.0)) throw Error("InvalidSpec", "epsilon must be > 0");
    for (const auto& [name, v] : overrides)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("InvalidSpec", "override for " + name + " must be in [0, 1]");
}

double MergeSpec::t_for(const std::string& name) const {
    auto it = overrides.find(name);
    return it == overrides.end() ? t : it->second;
}

std::string serialize(const TensorMap& map) {
    map.validate();
    nlohmann::ordered_json header = nlohmann::ordered_json::object();
    std::uint64_t offset = 0;
    for (const auto& [name, t] : map.entries) {
        const std::uint64_t length = t.data.size() * 4;
        header[name] = {{"dtype", "f32"}, {"shape", t.shape}, {"offset", offset}, {"length", length}};
        offset += length;
    }
    if (!map.metadata.empty()) header["__metadata__"] = map.metadata;
    const std::string h = header.dump();

    std::string out(kMagic);
    put_u64(out, h.size());
    out += h;
    out.reserve(out.size() + offset);
    for (const auto& [name, t] : map.entries)
        for (float f : t.data) put_f32(out, f);
    return out;
}

TensorMap deserialize(std::string_view bytes) {
    if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic)
        throw Error("BadMagic", "not a TMAP1 checkpoint");
    if (bytes.size() < kMagic.size() + 8) throw Error("HeaderMismatch", "truncated header length");
    const std::uint64_t hlen = get_u64(bytes.substr(kMagic.size(), 8));
    const std::size_t hstart = kMagic.size() + 8;
    if (hlen > bytes.size() - hstart) throw Error("HeaderMismatch", "header length exceeds file size");
    const std::string_view payload = bytes.substr(hstart + hlen);

    nlohmann::json header;
    try {
        header = nlohmann::json::parse(bytes.substr(hstart, hlen));
    } catch (const nlohmann::json::parse_error& ex) {
        throw Error("HeaderMismatch", std::string("unreadable header: ") + ex.what());
    }
    if (!header.is_object()) throw Error("HeaderMismatch", "header is not an object");

    TensorMap map;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> spans;
    try {
        for (const auto& [name, entry] : header.items()) {
            if (name == "__metadata__") {
                map.metadata = entry.get<std::map<std::string, std::string>>();
                continue;
            }
            if (entry.at("dtype").get<std::string>() != "f32")
                throw Error("HeaderMismatch", name + ": unsupported dtype");
            Tensor t;
            t.shape = entry.at("shape").get<std::vector<std::int64_t>>();
            for (auto d : t.shape)
                if (d < 0) throw Error("HeaderMismatch", name + ": negative dimension");
            const auto offset = entry.at("offset").get<std::uint64_t>();
            const auto length = entry.at("length").get<std::uint64_t>();
            if (length != t.element_count() * 4)
                throw Error("HeaderMismatch", name + ": byte length does not match shape");
            if (offset > payload.size() || length > payload.size() - offset)
                throw Error("HeaderMismatch", name + ": tensor extends past end of payload");
            t.data.resize(t.element_count());
            for (std::size_t i = 0; i < t.data.size(); ++i) {
                t.data[i] = get_f32(payload.data() + offset + 4 * i);
                if (!std::isfinite(t.data[i]))
                    throw Error("NonFinitePayload", name + ": element " + std::to_string(i) + " is not finite");
            }
            spans.emplace_back(offset, length);
            map.entries.emplace(name, std::move(t));
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error("HeaderMismatch", std::string("bad header entry: ") + ex.what());
    }

    std::sort(spans.begin(), spans.end());
    std::uint64_t expected = 0;
    for (const auto& [offset, length] : spans) {
        if (offset != expected) throw Error("HeaderMismatch", "payload is not contiguous");
        expected += length;
    }
    if (expected != payload.size()) throw Error("HeaderMismatch", "payload size differs from header");
    return map;
}

void save_checkpoint(const TensorMap& map, const std::string& path) { text::write_file(path, serialize(map)); }

TensorMap load_checkpoint(const std::string& path) { return deserialize(text::read_file(path)); }

std::vector<Violation> validate_compat(const TensorMap& a, const TensorMap& b) {
    std::vector<Violation> out;
    for (const auto& [name, ta] : a.entries) {
        auto it = b.entries.find(name);
        if (it == b.entries.end()) {
            out.push_back({"missing_key", name, "absent from second checkpoint"});
        } else if (ta.shape != it->second.shape) {
            out.push_back({"shape_mismatch", name, shape_string(ta.shape) + " vs " + shape_string(it->second.shape)});
        }
    }
    for (const auto& [name, tb] : b.entries)
        if (!a.entries.contains(name)) out.push_back({"missing_key", name, "absent from first checkpoint"});
    return out;
}

std::vector<float> slerp(std::span<const float> u, std::span<const float> v, double t, double epsilon,
                         bool* antipodal) {
    if (u.size() != v.size()) throw Error("IncompatibleCheckpoints", "vector lengths differ");
    if (antipodal) *antipodal = false;
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    nu = std::sqrt(nu);
    nv = std::sqrt(nv);

    double wu = 1.0 - t, wv = t;
    if (nu > 0.0 && nv > 0.0) {
        const double c = std::clamp(dot / (nu * nv), -1.0, 1.0);
        const double omega = std::acos(c);
        const double s = std::sin(omega);
        if (s >= epsilon) {
            wu = std::sin((1.0 - t) * omega) / s;
            wv = std::sin(t * omega) / s;
        } else if (c < 0.0 && antipodal) {
            *antipodal = true;
        }
    }
    std::vector<float> out(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) out[i] = static_cast<float>(wu * u[i] + wv * v[i]);
    return out;
}

MergeResult slerp_merge(const TensorMap& a, const TensorMap& b, const MergeSpec& spec) {
    spec.validate();
    const auto violations = validate_compat(a, b);
    if (!violations.empty()) {
        std::string msg;
        for (const auto& v : violations) msg += (msg.empty() ? "" : "; ") + v.code + " " + v.tensor;
        throw Error("IncompatibleCheckpoints", msg);
    }
    for (const auto& [name, v] : spec.overrides)
        if (!a.entries.contains(name)) throw Error("InvalidSpec", "override for unknown tensor " + name);

    MergeResult r;
    r.merged.metadata = a.metadata;
    for (const auto& [name, ta] : a.entries) {
        const Tensor& tb = b.entries.at(name);
        bool antipodal = false;
        Tensor out;
        out.shape = ta.shape;
        out.data = slerp(ta.data, tb.data, spec.t_for(name), spec.epsilon, &antipodal);
        if (antipodal) r.warnings.push_back(name + ": antipodal tensors, interpolated linearly");
        r.merged.entries.emplace(name, std::move(out));
    }
    return r;
}

} // namespace vhdlx::merge
