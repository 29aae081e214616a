#include "vhdlx/training.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <set>

namespace vhdlx::training {
namespace {

template <typename T>
void put_le(std::string& out, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i)
        out.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    return static_cast<T>(v);
}

void finish_window(std::vector<PackedSequence>& out, PackedSequence& cur, std::size_t ctx,
                   TokenId pad_id) {
    cur.pad_from = cur.tokens.size();
    cur.tokens.resize(ctx, pad_id);
    cur.segment_ids.resize(ctx, 0);
    out.push_back(std::move(cur));
    cur = {};
}

} // namespace

std::vector<PackedSequence> pack_documents(std::span<const std::vector<TokenId>> docs,
                                           std::size_t context_length, TokenId eos_id,
                                           TokenId pad_id) {
    if (context_length < 2 || context_length > 65535)
        throw Error("InvalidArgument", "context_length must be in [2, 65535]");
    const std::size_t max_piece = context_length - 1;
    std::vector<PackedSequence> out;
    PackedSequence cur;
    std::uint16_t segment = 0;

    auto place = [&](std::span<const TokenId> piece) {
        if (cur.tokens.size() + piece.size() + 1 > context_length) {
            finish_window(out, cur, context_length, pad_id);
            segment = 0;
        }
        ++segment;
        cur.tokens.insert(cur.tokens.end(), piece.begin(), piece.end());
        cur.tokens.push_back(eos_id);
        cur.segment_ids.insert(cur.segment_ids.end(), piece.size() + 1, segment);
    };

    for (const auto& doc : docs) {
        if (doc.size() <= max_piece) {
            place(doc);
            continue;
        }
        for (std::size_t off = 0; off < doc.size(); off += max_piece)
            place(std::span<const TokenId>(doc).subspan(off, std::min(max_piece, doc.size() - off)));
    }
    if (!cur.tokens.empty()) finish_window(out, cur, context_length, pad_id);
    return out;
}

AttentionMask::AttentionMask(const PackedSequence& packed)
    : n_(packed.segment_ids.size()), bits_(n_ * n_, false) {
    // Segments are contiguous runs, so each query row is one contiguous key range.
    std::size_t run_start = 0;
    for (std::size_t i = 0; i < n_; ++i) {
        const auto seg = packed.segment_ids[i];
        if (i > 0 && seg != packed.segment_ids[i - 1]) run_start = i;
        if (seg == 0) continue;
        for (std::size_t j = run_start; j <= i; ++j) bits_[i * n_ + j] = true;
    }
}

AttentionMask build_attention_mask(const PackedSequence& packed) { return AttentionMask(packed); }

void write_shard(const std::string& path, std::span<const PackedSequence> seqs) {
    std::string buf;
    for (const auto& s : seqs) {
        for (TokenId t : s.tokens) put_le<std::uint32_t>(buf, t);
        for (std::uint16_t g : s.segment_ids) put_le<std::uint16_t>(buf, g);
    }
    text::write_file(path, buf);
}

std::vector<PackedSequence> read_shard(const std::string& path, std::size_t context_length,
                                       TokenId pad_id) {
    const std::string data = text::read_file(path);
    const std::size_t record = context_length * 6;
    if (context_length == 0 || data.size() % record != 0)
        throw Error("HeaderMismatch", path + ": size is not a multiple of the record length");
    std::vector<PackedSequence> out;
    const auto* p = reinterpret_cast<const unsigned char*>(data.data());
    for (std::size_t off = 0; off < data.size(); off += record) {
        PackedSequence s;
        s.tokens.resize(context_length);
        s.segment_ids.resize(context_length);
        for (std::size_t i = 0; i < context_length; ++i)
            s.tokens[i] = get_le<std::uint32_t>(p + off + 4 * i);
        for (std::size_t i = 0; i < context_length; ++i)
            s.segment_ids[i] = get_le<std::uint16_t>(p + off + 4 * context_length + 2 * i);
        s.pad_from = context_length;
        while (s.pad_from > 0 && s.segment_ids[s.pad_from - 1] == 0 &&
               s.tokens[s.pad_from - 1] == pad_id)
            --s.pad_from;
        out.push_back(std::move(s));
    }
    return out;
}

// ---- data mix ----------------------------------------------------------------

void MixSpec::validate() const {
    if (fractions.empty()) throw Error("InvalidMix", "no pools in mix");
    std::set<std::string> seen;
    double sum = 0.0;
    for (const auto& [label, f] : fractions) {
        if (!seen.insert(label).second) throw Error("InvalidMix", "pool '" + label + "' listed twice");
        if (!(f >= 0.0 && f <= 1.0)) throw Error("InvalidMix", "fraction of '" + label + "' not in [0,1]");
        sum += f;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("InvalidMix", "fractions must sum to 1");
}

MixSpec MixSpec::paper_default() {
    return MixSpec{{{"replay", 0.40}, {"code", 0.28}, {"documents", 0.32}}};
}

std::vector<std::size_t> apportion(const MixSpec& mix, std::size_t n_chunks) {
    mix.validate();
    const std::size_t k = mix.fractions.size();
    std::vector<std::size_t> quota(k);
    std::vector<double> remainder(k);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < k; ++i) {
        const double exact = static_cast<double>(n_chunks) * mix.fractions[i].second;
        quota[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
        remainder[i] = exact - static_cast<double>(quota[i]);
        assigned += quota[i];
    }
    std::vector<std::size_t> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b] + 1e-12; });
    for (std::size_t r = 0; assigned < n_chunks; ++r, ++assigned) ++quota[order[r % k]];
    while (assigned > n_chunks) {
        // only reachable through rounding slop; take back from the smallest remainders
        auto it = std::find_if(order.rbegin(), order.rend(), [&](std::size_t i) { return quota[i] > 0; });
        --quota[*it];
        --assigned;
    }
    return quota;
}

std::vector<ScheduledChunk> sample_mix(std::span<const Pool> pools, const MixSpec& mix,
                                       std::size_t n_chunks, std::uint64_t seed) {
    const auto quota = apportion(mix, n_chunks);
    const std::size_t k = quota.size();

    std::vector<std::vector<std::size_t>> draws(k);
    for (std::size_t i = 0; i < k; ++i) {
        const auto& label = mix.fractions[i].first;
        auto pool = std::find_if(pools.begin(), pools.end(), [&](const Pool& p) { return p.label == label; });
        if (pool == pools.end()) throw Error("InvalidMix", "no pool named '" + label + "'");
        if (pool->size < quota[i])
            throw Error("PoolExhausted", "pool '" + label + "' has " + std::to_string(pool->size) +
                                             " chunks, " + std::to_string(quota[i]) + " required");
        std::vector<std::size_t> idx(pool->size);
        std::iota(idx.begin(), idx.end(), 0);
        std::mt19937_64 rng(seed ^ text::fnv1a64(label));
        // partial Fisher-Yates: only the first quota[i] positions are needed
        for (std::size_t j = 0; j < quota[i]; ++j) {
            std::uniform_int_distribution<std::size_t> pick(j, idx.size() - 1);
            std::swap(idx[j], idx[pick(rng)]);
        }
        idx.resize(quota[i]);
        draws[i] = std::move(idx);
    }

    std::vector<ScheduledChunk> schedule;
    schedule.reserve(n_chunks);
    std::vector<std::size_t> emitted(k, 0);
    const auto n = static_cast<long double>(n_chunks);
    for (std::size_t step = 1; step <= n_chunks; ++step) {
        // deficit_i = step * quota_i / n - emitted_i, compared exactly as step*quota_i - n*emitted_i
        std::size_t best = k;
        long double best_deficit = 0;
        for (std::size_t i = 0; i < k; ++i) {
            if (emitted[i] == quota[i]) continue;
            const long double deficit = static_cast<long double>(step) * quota[i] - n * emitted[i];
            if (best == k || deficit > best_deficit) {
                best = i;
                best_deficit = deficit;
            }
        }
        schedule.push_back({mix.fractions[best].first, draws[best][emitted[best]]});
        ++emitted[best];
    }
    return schedule;
}

// ---- schedules and presets ---------------------------------------------------------------

void TrainConfig::validate() const {
    if (global_batch_size == 0 || context_length == 0)
        throw Error("InvalidConfig", "batch size and context length must be positive");
    if (warmup_steps >= total_steps) throw Error("InvalidConfig", "warmup_steps must be < total_steps");
    if (!(min_lr >= 0.0 && max_lr > min_lr)) throw Error("InvalidConfig", "require max_lr > min_lr >= 0");
}

TrainConfig preset(const std::string& name) {
    if (name == "ept") return {512, 8192, 5e-5, 25, 420, 0.0, "ept"};
    if (name == "it") return {128, 8192, 5e-5, 200, 20000, 0.0, "it"};
    throw Error("UnknownPreset", "no training preset named '" + name + "'");
}

double lr_at(std::uint64_t step, const TrainConfig& c) {
    if (step > c.total_steps)
        throw Error("StepOutOfRange", "step " + std::to_string(step) + " beyond total_steps " +
                                          std::to_string(c.total_steps));
    if (step < c.warmup_steps)
        return c.max_lr * static_cast<double>(step) / static_cast<double>(c.warmup_steps);
    const double progress = static_cast<double>(step - c.warmup_steps) /
                            static_cast<double>(c.total_steps - c.warmup_steps);
    return c.min_lr + (c.max_lr - c.min_lr) * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

std::uint64_t token_budget(const TrainConfig& c) {
    return c.total_steps * c.global_batch_size * c.context_length;
}

nlohmann::ordered_json to_json(const TrainConfig& c) {
    nlohmann::ordered_json j;
    j["global_batch_size"] = c.global_batch_size;
    j["context_length"] = c.context_length;
    j["max_lr"] = c.max_lr;
    j["warmup_steps"] = c.warmup_steps;
    j["total_steps"] = c.total_steps;
    j["min_lr"] = c.min_lr;
    j["preset_name"] = c.preset_name;
    return j;
}

TrainConfig config_from_json(const nlohmann::json& j) {
    TrainConfig c;
    try {
        c.global_batch_size = j.at("global_batch_size").get<std::uint64_t>();
        c.context_length = j.at("context_length").get<std::uint64_t>();
        c.max_lr = j.at("max_lr").get<double>();
        c.warmup_steps = j.at("warmup_steps").get<std::uint64_t>();
        c.total_steps = j.at("total_steps").get<std::uint64_t>();
        c.min_lr = j.value("min_lr", 0.0);
        c.preset_name = j.value("preset_name", std::string{});
    } catch (const nlohmann::json::exception& e) {
        throw Error("ParseError", std::string("train config: ") + e.what());
    }
    c.validate();
    return c;
}

std::string emit_train_config(const std::string& preset_name) {
    return to_json(preset(preset_name)).dump(2) + "\n";
}

} // namespace vhdlx::training
