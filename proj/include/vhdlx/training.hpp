#pragma once

#include "vhdlx/tokenizer.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::training {

using tokenizer::TokenId;

struct PackedSequence {
    std::vector<TokenId> tokens;         // length == context_length
    std::vector<std::uint16_t> segment_ids;  // 1-based per document, 0 for padding
    std::size_t pad_from = 0;            // == context_length when unpadded

    bool operator==(const PackedSequence&) const = default;
};

// Greedy first-fit in input order. Each document is followed by eos; documents that cannot
// fit with their eos are first split into pieces of at most context_length - 1 tokens.
// The last window is padded with pad_id.
std::vector<PackedSequence> pack_documents(std::span<const std::vector<TokenId>> docs,
                                           std::size_t context_length, TokenId eos_id,
                                           TokenId pad_id);

// Document-isolating causal mask for one packed window.
class AttentionMask {
public:
    explicit AttentionMask(const PackedSequence& packed);

    std::size_t size() const { return n_; }
    bool allowed(std::size_t query, std::size_t key) const { return bits_[query * n_ + key]; }

private:
    std::size_t n_;
    std::vector<bool> bits_;
};

AttentionMask build_attention_mask(const PackedSequence& packed);

// Shard file: fixed-length records, context_length little-endian u32 token ids followed by
// context_length little-endian u16 segment ids.
void write_shard(const std::string& path, std::span<const PackedSequence> seqs);
std::vector<PackedSequence> read_shard(const std::string& path, std::size_t context_length,
                                       TokenId pad_id);

// ---- data mix ----------------------------------------------------------------

struct Pool {
    std::string label;
    std::size_t size = 0;  // available chunks
};

struct MixSpec {
    // Declaration order is the tie-break order.
    std::vector<std::pair<std::string, double>> fractions;

    void validate() const;  // InvalidMix
    static MixSpec paper_default();  // replay 0.40, code 0.28, documents 0.32
};

struct ScheduledChunk {
    std::string pool;
    std::size_t chunk = 0;  // index within the pool

    bool operator==(const ScheduledChunk&) const = default;
};

// Largest-remainder quota per pool, ties by declaration order.
std::vector<std::size_t> apportion(const MixSpec& mix, std::size_t n_chunks);

// Pools are emitted by largest accumulated deficit so every prefix stays within one chunk of
// its target share. The seed only permutes which chunk of each pool is drawn.
// Errors: PoolExhausted, InvalidMix.
std::vector<ScheduledChunk> sample_mix(std::span<const Pool> pools, const MixSpec& mix,
                                       std::size_t n_chunks, std::uint64_t seed);

// ---- schedules and presets ---------------------------------------------------------------

struct TrainConfig {
    std::uint64_t global_batch_size = 0;
    std::uint64_t context_length = 0;
    double max_lr = 0.0;
    std::uint64_t warmup_steps = 0;
    std::uint64_t total_steps = 0;
    double min_lr = 0.0;
    std::string preset_name;

    void validate() const;  // InvalidConfig
};

TrainConfig preset(const std::string& name);  // "ept" | "it"; UnknownPreset otherwise

// Linear warmup then cosine decay to min_lr. StepOutOfRange outside [0, total_steps].
double lr_at(std::uint64_t step, const TrainConfig& config);

std::uint64_t token_budget(const TrainConfig& config);

nlohmann::ordered_json to_json(const TrainConfig& config);
TrainConfig config_from_json(const nlohmann::json& j);
// Serialized preset, byte-stable.
std::string emit_train_config(const std::string& preset_name);

} // namespace vhdlx::training
