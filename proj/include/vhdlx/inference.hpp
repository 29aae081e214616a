#pragma once

#include "vhdlx/analytics.hpp"
#include "vhdlx/testset.hpp"
#include "vhdlx/tokenizer.hpp"

#include <chrono>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::inference {

using tokenizer::TokenId;

struct DecodeMode {
    enum class Kind { greedy, beam };
    Kind kind = Kind::greedy;
    std::size_t width = 1;

    static DecodeMode greedy() { return {}; }
    static DecodeMode beam(std::size_t width) { return {Kind::beam, width}; }
    // "greedy" or "beam:<width>"
    std::string key() const;
};

struct GenerationRequest {
    std::string prompt;
    std::size_t max_new_tokens = 256;
    DecodeMode mode;
    std::vector<std::string> stop;

    void validate() const;  // InvalidRequest: width outside 1..64, max_new_tokens == 0
};

enum class FinishReason { eos, length, stop };
std::string_view to_string(FinishReason r);
FinishReason parse_finish_reason(std::string_view s);

struct Completion {
    std::string text;
    std::vector<TokenId> tokens;
    std::optional<double> logprob;
    FinishReason finish = FinishReason::eos;
};

class Backend {
public:
    virtual ~Backend() = default;
    // Errors: BackendUnavailable, BackendProtocolError.
    virtual Completion generate(const GenerationRequest& request) = 0;
};

// Replays scripted outputs keyed by the FNV-1a hash of the prompt. An entry may be restricted
// to one decode mode; mode-specific entries win over mode-less ones.
class MockBackend final : public Backend {
public:
    struct Entry {
        std::string text;
        FinishReason finish = FinishReason::eos;
    };

    void add(std::string_view prompt, std::string text, std::optional<DecodeMode> mode = std::nullopt,
             FinishReason finish = FinishReason::eos);
    void add_hashed(const std::string& prompt_hash, std::string text, std::string mode_key = {},
                    FinishReason finish = FinishReason::eos);
    std::size_t size() const { return entries_.size(); }

    Completion generate(const GenerationRequest& request) override;

    // {"entries":[{"prompt_hash":"...", "mode":"beam:2"?, "text":"...", "finish_reason":"eos"?}]}
    // "prompt" may be given instead of "prompt_hash".
    static MockBackend from_json(const nlohmann::json& j);
    static MockBackend load(const std::string& path);
    nlohmann::ordered_json to_json() const;

private:
    std::map<std::pair<std::string, std::string>, Entry> entries_;  // (hash, mode key)
};

// POSTs {prompt, max_new_tokens, mode, width, stop} to one endpoint and expects
// {text, finish_reason}. Connection failures are retried.
class HttpBackend final : public Backend {
public:
    struct Options {
        std::chrono::milliseconds timeout{30000};
        int retries = 2;
    };

    // endpoint: "http://host:port/path"
    HttpBackend(const std::string& endpoint, Options options);
    explicit HttpBackend(const std::string& endpoint) : HttpBackend(endpoint, Options{}) {}

    Completion generate(const GenerationRequest& request) override;

private:
    std::string scheme_host_port_;
    std::string path_;
    Options options_;
};

nlohmann::ordered_json request_json(const GenerationRequest& request);

// Full next-token distribution for a prefix. Must be deterministic per prefix and safe for
// concurrent read-only use.
class NextTokenOracle {
public:
    virtual ~NextTokenOracle() = default;
    virtual std::size_t vocab_size() const = 0;
    virtual std::vector<double> distribution(std::span<const TokenId> prefix) const = 0;
};

struct BeamResult {
    std::vector<TokenId> tokens;  // generated tokens only, eos included when emitted
    double logprob = 0.0;
    bool ended_with_eos = false;
};

// Length-bounded beam search over summed log-probabilities. Hypotheses ending in eos retire
// into a finished pool, as do the live ones when max_len is reached; the best pooled
// hypothesis is returned. Ties break lexicographically by token ids.
BeamResult beam_search(const NextTokenOracle& oracle, std::span<const TokenId> prefix,
                       std::size_t width, std::size_t max_len, TokenId eos_id);

// Argmax decoding, lowest id on ties.
BeamResult greedy_decode(const NextTokenOracle& oracle, std::span<const TokenId> prefix,
                         std::size_t max_len, TokenId eos_id);

// Decodes token-level against an oracle, using a tokenizer for prompt and output text.
class OracleBackend final : public Backend {
public:
    OracleBackend(const NextTokenOracle& oracle, const tokenizer::Tokenizer& tok)
        : oracle_(oracle), tok_(tok) {}

    Completion generate(const GenerationRequest& request) override;

private:
    const NextTokenOracle& oracle_;
    const tokenizer::Tokenizer& tok_;
};

struct SweepConfig {
    std::vector<std::size_t> widths;
    std::size_t max_new_tokens = 512;
    std::optional<analytics::CalibrationMap> calibration;  // applied to the mean judge score
};

struct SweepRow {
    std::size_t width = 0;
    std::size_t items = 0;
    double mean_judge_score = 0.0;
    double normalized_score = 0.0;
    int percent = 0;
};

// Generates an explanation per item and width, has the judge score it, and reports the mean
// per width. Errors: EmptyInput, InvalidArgument, plus anything the backends raise.
std::vector<SweepRow> beam_sweep(Backend& model, Backend& judge,
                                 std::span<const testset::CodeExplanationItem> items,
                                 const SweepConfig& config);

std::string format_sweep(std::span<const SweepRow> rows);

} // namespace vhdlx::inference
