#pragma once

#include "vhdlx/corpus.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::tokenizer {

using TokenId = std::uint32_t;

// Escaping used by vocab and merges files: bytes 0x21..0x7e other than '\' are literal,
// everything else is written as \xHH.
std::string escape_token(std::string_view bytes);
std::string unescape_token(std::string_view escaped);

struct Vocabulary {
    std::map<std::string, TokenId> token_to_id;
    std::map<std::string, TokenId> special_tokens;  // must include "EOS"
};

using MergeList = std::vector<std::pair<std::string, std::string>>;

// Immutable after construction; encode/decode are safe to call concurrently.
class Tokenizer {
public:
    // Validates the invariants. Missing single-byte tokens and a missing EOS are appended
    // with fresh ids above the current maximum so that small hand-built vocabularies load.
    Tokenizer(Vocabulary vocab, MergeList merges);

    std::vector<TokenId> encode(std::string_view text) const;
    std::string decode(std::span<const TokenId> ids) const;

    TokenId id_of(std::string_view token) const;  // throws UnknownToken
    TokenId eos_id() const { return eos_; }
    std::size_t vocab_size() const { return id_to_token_.size(); }
    std::size_t merge_count() const { return merge_rank_.size(); }
    const Vocabulary& vocabulary() const { return vocab_; }

private:
    static std::uint64_t pair_key(TokenId a, TokenId b) {
        return (static_cast<std::uint64_t>(a) << 32) | b;
    }

    Vocabulary vocab_;
    std::vector<std::string> id_to_token_;
    std::vector<bool> is_special_;
    std::array<TokenId, 256> byte_ids_{};
    // (left id, right id) -> (rank, merged id)
    std::unordered_map<std::uint64_t, std::pair<std::uint32_t, TokenId>> merge_rank_;
    TokenId eos_ = 0;
};

// Vocab file: "token <escaped> <id>" and "special <name> <id>" lines; '#' starts a comment.
// Merges file: "<left> <right>" per line, priority = line order; '#' lines are skipped.
// Errors: MalformedVocab, DanglingMerge.
Tokenizer load_bpe(const std::string& vocab_file, const std::string& merges_file);
Tokenizer parse_bpe(std::string_view vocab_text, std::string_view merges_text);
std::string format_vocab(const Vocabulary& vocab);

enum class Bucket { vhdl_code, other_code, documents };

struct TokenStats {
    std::uint64_t vhdl_code = 0;
    std::uint64_t other_code = 0;
    std::uint64_t documents = 0;

    std::uint64_t& at(Bucket b);
    std::uint64_t total() const { return vhdl_code + other_code + documents; }
    bool operator==(const TokenStats&) const = default;
};

using BucketFn = std::function<Bucket(const corpus::SourceDocument&)>;

// VHDL-family code -> vhdl_code, any other code -> other_code, everything else -> documents.
Bucket default_bucket(const corpus::SourceDocument& doc);

TokenStats count_tokens(const Tokenizer& tok, std::span<const corpus::SourceDocument> corpus,
                        const BucketFn& bucket = default_bucket);

nlohmann::ordered_json to_json(const TokenStats& stats);
TokenStats stats_from_json(const nlohmann::json& j);

} // namespace vhdlx::tokenizer
