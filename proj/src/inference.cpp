#include "vhdlx/inference.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/judging.hpp"
#include "vhdlx/text.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <thread>

namespace vhdlx::inference {
namespace {

struct Hypothesis {
    std::vector<TokenId> tokens;
    double logprob = 0.0;
};

// Higher log-probability first, then lexicographically smaller token ids.
bool better(const Hypothesis& a, const Hypothesis& b) {
    if (a.logprob != b.logprob) return a.logprob > b.logprob;
    return std::lexicographical_compare(a.tokens.begin(), a.tokens.end(), b.tokens.begin(),
                                        b.tokens.end());
}

std::vector<double> checked_distribution(const NextTokenOracle& oracle, std::vector<TokenId>& context) {
    auto dist = oracle.distribution(context);
    if (dist.size() != oracle.vocab_size())
        throw Error("OracleError", "distribution size differs from vocabulary size");
    double sum = 0.0;
    for (double p : dist) {
        if (!(p >= 0.0)) throw Error("OracleError", "negative or NaN probability");
        sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-9) throw Error("OracleError", "distribution does not sum to 1");
    return dist;
}

} // namespace

std::string DecodeMode::key() const {
    return kind == Kind::greedy ? std::string("greedy") : "beam:" + std::to_string(width);
}

void GenerationRequest::validate() const {
    if (max_new_tokens == 0) throw Error("InvalidRequest", "max_new_tokens must be >= 1");
    if (mode.kind == DecodeMode::Kind::beam && (mode.width < 1 || mode.width > 64))
        throw Error("InvalidRequest", "beam width must be in 1..64");
}

std::string_view to_string(FinishReason r) {
    switch (r) {
    case FinishReason::length:
        return "length";
    case FinishReason::stop:
        return "stop";
    case FinishReason::eos:
        break;
    }
    return "eos";
}

FinishReason parse_finish_reason(std::string_view s) {
    if (s == "eos") return FinishReason::eos;
    if (s == "length") return FinishReason::length;
    if (s == "stop") return FinishReason::stop;
    throw Error("BackendProtocolError", "unknown finish_reason '" + std::string(s) + "'");
}

// ---- mock backend --------------------------------------------------------------------

void MockBackend::add(std::string_view prompt, std::string text, std::optional<DecodeMode> mode,
                      FinishReason finish) {
    add_hashed(text::fnv1a64_hex(prompt), std::move(text), mode ? mode->key() : std::string{}, finish);
}

void MockBackend::add_hashed(const std::string& prompt_hash, std::string text, std::string mode_key,
                             FinishReason finish) {
    entries_[{prompt_hash, std::move(mode_key)}] = Entry{std::move(text), finish};
}

Completion MockBackend::generate(const GenerationRequest& request) {
    request.validate();
    const std::string hash = text::fnv1a64_hex(request.prompt);
    auto it = entries_.find({hash, request.mode.key()});
    if (it == entries_.end()) it = entries_.find({hash, std::string{}});
    if (it == entries_.end())
        throw Error("BackendProtocolError", "mock backend has no scripted output for prompt " + hash);
    Completion c;
    c.text = it->second.text;
    c.finish = it->second.finish;
    return c;
}

MockBackend MockBackend::from_json(const nlohmann::json& j) {
    MockBackend m;
    try {
        for (const auto& e : j.at("entries")) {
            std::string hash = e.contains("prompt_hash") ? e.at("prompt_hash").get<std::string>()
                                                         : text::fnv1a64_hex(e.at("prompt").get<std::string>());
            const auto finish = parse_finish_reason(e.value("finish_reason", std::string("eos")));
            m.add_hashed(hash, e.at("text").get<std::string>(), e.value("mode", std::string{}), finish);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error("ParseError", std::string("mock script: ") + ex.what());
    }
    return m;
}

MockBackend MockBackend::load(const std::string& path) {
    try {
        return from_json(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::parse_error& ex) {
        throw Error("ParseError", path + ": " + ex.what());
    }
}

nlohmann::ordered_json MockBackend::to_json() const {
    nlohmann::ordered_json entries = nlohmann::ordered_json::array();
    for (const auto& [key, entry] : entries_) {
        nlohmann::ordered_json e;
        e["prompt_hash"] = key.first;
        if (!key.second.empty()) e["mode"] = key.second;
        e["text"] = entry.text;
        if (entry.finish != FinishReason::eos) e["finish_reason"] = std::string(inference::to_string(entry.finish));
        entries.push_back(std::move(e));
    }
    nlohmann::ordered_json j;
    j["entries"] = std::move(entries);
    return j;
}

// ---- http backend ------------------------------------------------------------------------

nlohmann::ordered_json request_json(const GenerationRequest& r) {
    nlohmann::ordered_json j;
    j["prompt"] = r.prompt;
    j["max_new_tokens"] = r.max_new_tokens;
    j["mode"] = r.mode.kind == DecodeMode::Kind::greedy ? "greedy" : "beam";
    j["width"] = r.mode.kind == DecodeMode::Kind::greedy ? 1 : r.mode.width;
    j["stop"] = r.stop;
    return j;
}

HttpBackend::HttpBackend(const std::string& endpoint, Options options) : options_(options) {
    const auto scheme = endpoint.find("://");
    if (scheme == std::string::npos) throw Error("InvalidArgument", "endpoint needs a scheme: " + endpoint);
    const auto slash = endpoint.find('/', scheme + 3);
    scheme_host_port_ = endpoint.substr(0, slash);
    path_ = slash == std::string::npos ? "/" : endpoint.substr(slash);
}

Completion HttpBackend::generate(const GenerationRequest& request) {
    request.validate();
    const std::string body = request_json(request).dump();
    httplib::Client client(scheme_host_port_);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(options_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(options_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    std::string last_error;
    for (int attempt = 0; attempt <= options_.retries; ++attempt) {
        if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(100 * attempt));
        auto res = client.Post(path_, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200)
            throw Error("BackendProtocolError", "backend answered HTTP " + std::to_string(res->status));
        try {
            const auto j = nlohmann::json::parse(res->body);
            Completion c;
            c.text = j.at("text").get<std::string>();
            c.finish = parse_finish_reason(j.at("finish_reason").get<std::string>());
            return c;
        } catch (const nlohmann::json::exception& ex) {
            throw Error("BackendProtocolError", std::string("malformed backend response: ") + ex.what());
        }
    }
    throw Error("BackendUnavailable", scheme_host_port_ + path_ + ": " + last_error);
}

// ---- token-level decoding ----------------------------------------------------------------

BeamResult beam_search(const NextTokenOracle& oracle, std::span<const TokenId> prefix,
                       std::size_t width, std::size_t max_len, TokenId eos_id) {
    if (width < 1 || max_len < 1) throw Error("InvalidArgument", "beam width and max_len must be >= 1");

    std::vector<Hypothesis> live{Hypothesis{}};
    std::vector<Hypothesis> finished;
    std::vector<TokenId> context(prefix.begin(), prefix.end());

    for (std::size_t step = 0; step < max_len && !live.empty(); ++step) {
        std::vector<Hypothesis> candidates;
        for (const auto& h : live) {
            context.resize(prefix.size());
            context.insert(context.end(), h.tokens.begin(), h.tokens.end());
            const auto dist = checked_distribution(oracle, context);
            for (std::size_t t = 0; t < dist.size(); ++t) {
                if (dist[t] <= 0.0) continue;
                Hypothesis c{h.tokens, h.logprob + std::log(dist[t])};
                c.tokens.push_back(static_cast<TokenId>(t));
                candidates.push_back(std::move(c));
            }
        }
        const std::size_t keep = std::min(width, candidates.size());
        std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep),
                          candidates.end(), better);
        candidates.resize(keep);

        live.clear();
        for (auto& c : candidates) {
            if (c.tokens.back() == eos_id) {
                finished.push_back(std::move(c));
            } else {
                live.push_back(std::move(c));
            }
        }
        if (!finished.empty()) {
            const auto best = std::min_element(finished.begin(), finished.end(), better);
            // extending a hypothesis never raises its log-probability
            std::erase_if(live, [&](const Hypothesis& h) { return h.logprob < best->logprob; });
        }
    }

    finished.insert(finished.end(), std::make_move_iterator(live.begin()),
                    std::make_move_iterator(live.end()));
    if (finished.empty()) return {};
    auto best = std::min_element(finished.begin(), finished.end(), better);
    BeamResult r;
    r.ended_with_eos = !best->tokens.empty() && best->tokens.back() == eos_id;
    r.logprob = best->logprob;
    r.tokens = std::move(best->tokens);
    return r;
}

BeamResult greedy_decode(const NextTokenOracle& oracle, std::span<const TokenId> prefix,
                         std::size_t max_len, TokenId eos_id) {
    std::vector<TokenId> context(prefix.begin(), prefix.end());
    BeamResult r;
    for (std::size_t step = 0; step < max_len; ++step) {
        const auto dist = checked_distribution(oracle, context);
        const auto best = static_cast<TokenId>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        r.tokens.push_back(best);
        r.logprob += std::log(dist[best]);
        context.push_back(best);
        if (best == eos_id) {
            r.ended_with_eos = true;
            break;
        }
    }
    return r;
}

Completion OracleBackend::generate(const GenerationRequest& request) {
    request.validate();
    const auto prefix = tok_.encode(request.prompt);
    const TokenId eos = tok_.eos_id();
    const BeamResult r = request.mode.kind == DecodeMode::Kind::greedy
                             ? greedy_decode(oracle_, prefix, request.max_new_tokens, eos)
                             : beam_search(oracle_, prefix, request.mode.width, request.max_new_tokens, eos);
    Completion c;
    c.tokens = r.tokens;
    c.logprob = r.logprob;
    c.finish = r.ended_with_eos ? FinishReason::eos : FinishReason::length;
    std::vector<TokenId> body = r.tokens;
    if (r.ended_with_eos) body.pop_back();
    c.text = tok_.decode(body);
    for (const auto& stop : request.stop) {
        if (stop.empty()) continue;
        if (auto pos = c.text.find(stop); pos != std::string::npos) {
            c.text.resize(pos);
            c.finish = FinishReason::stop;
        }
    }
    return c;
}

// ---- beam sweep ----------------------------------------------------------------------------

std::vector<SweepRow> beam_sweep(Backend& model, Backend& judge,
                                 std::span<const testset::CodeExplanationItem> items,
                                 const SweepConfig& config) {
    if (config.widths.empty()) throw Error("InvalidArgument", "no beam widths given");
    if (items.empty()) throw Error("EmptyInput", "no code-explanation items to sweep");

    std::vector<SweepRow> rows;
    for (const std::size_t width : config.widths) {
        double total = 0.0;
        for (const auto& item : items) {
            GenerationRequest req;
            req.prompt = testset::render_prompt(item);
            req.max_new_tokens = config.max_new_tokens;
            req.mode = DecodeMode::beam(width);
            const Completion explanation = model.generate(req);

            GenerationRequest judge_req;
            judge_req.prompt = judging::build_judge_prompt(item.code, item.reference_explanation,
                                                           explanation.text);
            judge_req.max_new_tokens = 256;
            total += judging::parse_judge_score(judge.generate(judge_req).text);
        }
        SweepRow row;
        row.width = width;
        row.items = items.size();
        row.mean_judge_score = total / static_cast<double>(items.size());
        row.normalized_score = config.calibration ? config.calibration->apply(row.mean_judge_score)
                                                  : row.mean_judge_score;
        row.percent = analytics::percent_score(row.normalized_score);
        rows.push_back(row);
    }
    return rows;
}

std::string format_sweep(std::span<const SweepRow> rows) {
    std::string out = "Beam Width  Normalized score  % score\n";
    for (const auto& r : rows) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%10zu  %16.2f  %7d\n", r.width, r.normalized_score, r.percent);
        out += buf;
    }
    return out;
}

} // namespace vhdlx::inference
