#include "vhdlx/tokenizer.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <charconv>
#include <cstdio>
#include <queue>
#include <sstream>

namespace vhdlx::tokenizer {
namespace {

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

TokenId parse_id(std::string_view s, const std::string& where) {
    TokenId id = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        throw Error("MalformedVocab", where + ": bad id '" + std::string(s) + "'");
    return id;
}

std::vector<std::string_view> fields_of(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
        std::size_t j = i;
        while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
        if (j > i) out.push_back(line.substr(i, j - i));
        i = j;
    }
    return out;
}

struct HeapEntry {
    std::uint32_t rank;
    std::uint32_t pos;
    TokenId left;
    TokenId right;

    bool operator>(const HeapEntry& o) const {
        return rank != o.rank ? rank > o.rank : pos > o.pos;
    }
};

} // namespace

std::string escape_token(std::string_view bytes) {
    std::string out;
    for (unsigned char c : bytes) {
        if (c >= 0x21 && c <= 0x7e && c != '\\') {
            out.push_back(static_cast<char>(c));
        } else {
            char buf[5];
            std::snprintf(buf, sizeof buf, "\\x%02x", c);
            out += buf;
        }
    }
    return out;
}

std::string unescape_token(std::string_view escaped) {
    std::string out;
    for (std::size_t i = 0; i < escaped.size(); ++i) {
        if (escaped[i] != '\\') {
            out.push_back(escaped[i]);
            continue;
        }
        if (i + 3 < escaped.size() && escaped[i + 1] == 'x') {
            const int hi = hex_value(escaped[i + 2]);
            const int lo = hex_value(escaped[i + 3]);
            if (hi >= 0 && lo >= 0) {
                out.push_back(static_cast<char>(hi * 16 + lo));
                i += 3;
                continue;
            }
        }
        throw Error("MalformedVocab", "bad escape in token '" + std::string(escaped) + "'");
    }
    return out;
}

Tokenizer::Tokenizer(Vocabulary vocab, MergeList merges) : vocab_(std::move(vocab)) {
    TokenId max_id = 0;
    bool any = false;
    for (const auto& [tok, id] : vocab_.token_to_id) {
        if (tok.empty()) throw Error("MalformedVocab", "empty token");
        max_id = any ? std::max(max_id, id) : id;
        any = true;
    }
    for (const auto& [name, id] : vocab_.special_tokens) {
        max_id = any ? std::max(max_id, id) : id;
        any = true;
    }
    TokenId next_id = any ? max_id + 1 : 0;
    for (int b = 0; b < 256; ++b) {
        const std::string byte(1, static_cast<char>(b));
        if (!vocab_.token_to_id.contains(byte)) vocab_.token_to_id.emplace(byte, next_id++);
    }
    if (!vocab_.special_tokens.contains("EOS")) vocab_.special_tokens.emplace("EOS", next_id++);

    id_to_token_.assign(next_id, {});
    std::vector<bool> used(next_id, false);
    is_special_.assign(next_id, false);
    for (const auto& [tok, id] : vocab_.token_to_id) {
        if (used[id]) throw Error("MalformedVocab", "id " + std::to_string(id) + " assigned twice");
        used[id] = true;
        id_to_token_[id] = tok;
    }
    for (const auto& [name, id] : vocab_.special_tokens) {
        if (used[id])
            throw Error("MalformedVocab",
                        "special token " + name + " reuses id " + std::to_string(id));
        used[id] = true;
        is_special_[id] = true;
        id_to_token_[id] = name;
    }
    for (int b = 0; b < 256; ++b) byte_ids_[b] = vocab_.token_to_id.at(std::string(1, static_cast<char>(b)));
    eos_ = vocab_.special_tokens.at("EOS");

    std::uint32_t rank = 0;
    for (const auto& [left, right] : merges) {
        auto l = vocab_.token_to_id.find(left);
        auto r = vocab_.token_to_id.find(right);
        auto m = vocab_.token_to_id.find(left + right);
        if (l == vocab_.token_to_id.end() || r == vocab_.token_to_id.end() ||
            m == vocab_.token_to_id.end())
            throw Error("DanglingMerge", "merge (" + escape_token(left) + ", " + escape_token(right) +
                                             ") refers to a token missing from the vocabulary");
        merge_rank_.try_emplace(pair_key(l->second, r->second), rank++, m->second);
    }
}

std::vector<TokenId> Tokenizer::encode(std::string_view input) const {
    const std::size_t n = input.size();
    std::vector<TokenId> tok(n);
    std::vector<std::int64_t> prev(n);
    std::vector<std::int64_t> next(n);
    std::vector<bool> alive(n, true);
    for (std::size_t i = 0; i < n; ++i) {
        tok[i] = byte_ids_[static_cast<unsigned char>(input[i])];
        prev[i] = static_cast<std::int64_t>(i) - 1;
        next[i] = i + 1 < n ? static_cast<std::int64_t>(i + 1) : -1;
    }

    std::priority_queue<HeapEntry, std::vector<HeapEntry>, std::greater<>> heap;
    std::vector<HeapEntry> pending;
    auto candidate = [&](std::int64_t left, std::vector<HeapEntry>& sink) {
        if (left < 0 || next[left] < 0) return;
        const TokenId a = tok[left];
        const TokenId b = tok[next[left]];
        if (auto it = merge_rank_.find(pair_key(a, b)); it != merge_rank_.end())
            sink.push_back({it->second.first, static_cast<std::uint32_t>(left), a, b});
    };
    for (std::size_t i = 0; i + 1 < n; ++i) candidate(static_cast<std::int64_t>(i), pending);

    // Each round merges every non-overlapping occurrence of the lowest-ranked pair, left to
    // right. Pairs created during a round only become eligible in the next round.
    bool in_round = false;
    std::uint32_t round_rank = 0;
    while (!heap.empty() || !pending.empty()) {
        if (heap.empty() || (in_round && heap.top().rank > round_rank)) {
            for (const auto& e : pending) heap.push(e);
            pending.clear();
            in_round = false;
            continue;
        }
        const HeapEntry e = heap.top();
        heap.pop();
        const auto pos = static_cast<std::int64_t>(e.pos);
        if (!alive[pos] || tok[pos] != e.left || next[pos] < 0 || tok[next[pos]] != e.right)
            continue;
        in_round = true;
        round_rank = e.rank;
        const std::int64_t victim = next[pos];
        tok[pos] = merge_rank_.at(pair_key(e.left, e.right)).second;
        alive[victim] = false;
        next[pos] = next[victim];
        if (next[victim] >= 0) prev[next[victim]] = pos;
        candidate(prev[pos], pending);
        candidate(pos, pending);
    }

    std::vector<TokenId> out;
    for (std::int64_t i = n > 0 ? 0 : -1; i >= 0; i = next[i]) out.push_back(tok[i]);
    return out;
}

std::string Tokenizer::decode(std::span<const TokenId> ids) const {
    std::string out;
    for (TokenId id : ids) {
        if (id >= id_to_token_.size() || id_to_token_[id].empty())
            throw Error("UnknownId", "token id " + std::to_string(id) + " is not in the vocabulary");
        // special tokens carry no bytes
        if (!is_special_[id]) out += id_to_token_[id];
    }
    return out;
}

TokenId Tokenizer::id_of(std::string_view token) const {
    auto it = vocab_.token_to_id.find(std::string(token));
    if (it == vocab_.token_to_id.end())
        throw Error("UnknownToken", "token '" + escape_token(token) + "' is not in the vocabulary");
    return it->second;
}

Tokenizer parse_bpe(std::string_view vocab_text, std::string_view merges_text) {
    Vocabulary vocab;
    std::size_t lineno = 0;
    for (const auto& line : text::split(vocab_text, '\n')) {
        ++lineno;
        const auto f = fields_of(line);
        if (f.empty() || f[0].starts_with("#")) continue;
        const std::string where = "vocab line " + std::to_string(lineno);
        if (f.size() != 3 || (f[0] != "token" && f[0] != "special"))
            throw Error("MalformedVocab", where + ": expected 'token|special <name> <id>'");
        const TokenId id = parse_id(f[2], where);
        auto& table = f[0] == "token" ? vocab.token_to_id : vocab.special_tokens;
        std::string key = f[0] == "token" ? unescape_token(f[1]) : std::string(f[1]);
        if (!table.emplace(std::move(key), id).second)
            throw Error("MalformedVocab", where + ": duplicate entry");
    }
    MergeList merges;
    lineno = 0;
    for (const auto& line : text::split(merges_text, '\n')) {
        ++lineno;
        const auto f = fields_of(line);
        if (f.empty() || f[0].starts_with("#")) continue;
        if (f.size() != 2)
            throw Error("MalformedVocab",
                        "merges line " + std::to_string(lineno) + ": expected '<left> <right>'");
        merges.emplace_back(unescape_token(f[0]), unescape_token(f[1]));
    }
    return Tokenizer(std::move(vocab), std::move(merges));
}

Tokenizer load_bpe(const std::string& vocab_file, const std::string& merges_file) {
    return parse_bpe(text::read_file(vocab_file), text::read_file(merges_file));
}

std::string format_vocab(const Vocabulary& vocab) {
    std::vector<std::pair<TokenId, std::string>> lines;
    for (const auto& [tok, id] : vocab.token_to_id)
        lines.emplace_back(id, "token " + escape_token(tok) + " " + std::to_string(id));
    for (const auto& [name, id] : vocab.special_tokens)
        lines.emplace_back(id, "special " + name + " " + std::to_string(id));
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& [id, line] : lines) out += line + "\n";
    return out;
}

std::uint64_t& TokenStats::at(Bucket b) {
    switch (b) {
    case Bucket::vhdl_code:
        return vhdl_code;
    case Bucket::other_code:
        return other_code;
    default:
        return documents;
    }
}

Bucket default_bucket(const corpus::SourceDocument& doc) {
    if (doc.kind != corpus::DocKind::code) return Bucket::documents;
    const auto lang = doc.language_tag ? doc.language_tag : corpus::language_for_path(doc.path);
    if (lang && lang->starts_with("vhdl")) return Bucket::vhdl_code;
    return Bucket::other_code;
}

TokenStats count_tokens(const Tokenizer& tok, std::span<const corpus::SourceDocument> corpus,
                        const BucketFn& bucket) {
    TokenStats stats;
    for (const auto& doc : corpus) stats.at(bucket(doc)) += tok.encode(doc.content).size();
    return stats;
}

nlohmann::ordered_json to_json(const TokenStats& stats) {
    nlohmann::ordered_json j;
    j["vhdl_code"] = stats.vhdl_code;
    j["other_code"] = stats.other_code;
    j["documents"] = stats.documents;
    return j;
}

TokenStats stats_from_json(const nlohmann::json& j) {
    TokenStats s;
    try {
        s.vhdl_code = j.at("vhdl_code").get<std::uint64_t>();
        s.other_code = j.at("other_code").get<std::uint64_t>();
        s.documents = j.at("documents").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw Error("ParseError", std::string("token stats: ") + e.what());
    }
    return s;
}

} // namespace vhdlx::tokenizer
