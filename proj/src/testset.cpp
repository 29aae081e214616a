#include "vhdlx/testset.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <algorithm>
#include <array>

#include <nlohmann/json.hpp>

namespace vhdlx::testset {
namespace {

using ojson = nlohmann::ordered_json;

constexpr std::array<std::pair<Topic, std::string_view>, 5> kTopics{{
    {Topic::digital_design, "digital_design"},
    {Topic::isa, "isa"},
    {Topic::microarchitecture, "microarchitecture"},
    {Topic::vhdl_syntax, "vhdl_syntax"},
    {Topic::other, "other"},
}};
constexpr std::array<std::pair<Status, std::string_view>, 4> kStatuses{{
    {Status::drafted, "drafted"},
    {Status::reviewed, "reviewed"},
    {Status::edited, "edited"},
    {Status::dropped, "dropped"},
}};
constexpr std::array<std::pair<ReviewAction, std::string_view>, 3> kActions{{
    {ReviewAction::approve, "approve"},
    {ReviewAction::edit, "edit"},
    {ReviewAction::drop, "drop"},
}};

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E v) {
    for (const auto& [e, s] : table) {
        if (e == v) return s;
    }
    return "?";
}

constexpr std::string_view kFormat = "vhdlx-testset";
constexpr int kSchemaVersion = 1;

const std::string kCodePrompt =
    "Please provide an expert explanation for the VHDL code snippet provided below. "
    "Your explanation should be less than 150 words.\n";

void check_scale(std::vector<Violation>& out, const char* field, int v) {
    if (v < 1 || v > 5)
        out.push_back({std::string(field) + "_out_of_range",
                       std::string(field) + " " + std::to_string(v) + " not in 1..5"});
}

// ---- JSON codec ------------------------------------------------------------

class RecordReader {
public:
    RecordReader(const nlohmann::json& j, std::string where) : j_(j), where_(std::move(where)) {}

    [[noreturn]] void fail(const std::string& field, const std::string& msg) const {
        throw Error("ParseError", where_ + ": field '" + field + "': " + msg);
    }

    const nlohmann::json& raw(const std::string& field) const {
        if (!j_.is_object() || !j_.contains(field)) fail(field, "missing");
        return j_.at(field);
    }

    std::string str(const std::string& field) const {
        const auto& v = raw(field);
        if (!v.is_string()) fail(field, "expected a string");
        return v.get<std::string>();
    }

    int integer(const std::string& field) const {
        const auto& v = raw(field);
        if (!v.is_number_integer()) fail(field, "expected an integer");
        return v.get<int>();
    }

    char letter(const std::string& field) const {
        const std::string s = str(field);
        if (s.size() != 1) fail(field, "expected a single letter");
        return s[0];
    }

    template <typename E, std::size_t N>
    E enumerated(const std::string& field,
                 const std::array<std::pair<E, std::string_view>, N>& table) const {
        const std::string s = str(field);
        for (const auto& [e, name] : table) {
            if (name == s) return e;
        }
        fail(field, "unknown value '" + s + "'");
    }

    const std::string& where() const { return where_; }

private:
    const nlohmann::json& j_;
    std::string where_;
};

ojson history_json(const std::vector<ReviewEvent>& history) {
    ojson arr = ojson::array();
    for (const auto& e : history) {
        ojson r;
        r["item_id"] = e.item_id;
        r["reviewer"] = e.reviewer;
        r["action"] = std::string(to_string(e.action));
        r["timestamp"] = e.timestamp;
        r["note"] = e.note;
        arr.push_back(std::move(r));
    }
    return arr;
}

std::vector<ReviewEvent> history_from(const RecordReader& rec) {
    std::vector<ReviewEvent> out;
    const auto& arr = rec.raw("history");
    if (!arr.is_array()) rec.fail("history", "expected an array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
        RecordReader ev(arr[i], rec.where() + ": history[" + std::to_string(i) + "]");
        out.push_back({ev.str("item_id"), ev.str("reviewer"), ev.enumerated("action", kActions),
                       ev.str("timestamp"), ev.str("note")});
    }
    return out;
}

ojson item_json(const TestItem& item) {
    ojson j;
    if (const auto* ce = std::get_if<CodeExplanationItem>(&item)) {
        j["type"] = "code_explanation";
        j["id"] = ce->id;
        j["topic"] = std::string(to_string(ce->topic));
        j["difficulty"] = ce->difficulty;
        j["relevance"] = ce->relevance;
        j["status"] = std::string(to_string(ce->status));
        j["code"] = ce->code;
        j["reference_explanation"] = ce->reference_explanation;
        j["history"] = history_json(ce->history);
        return j;
    }
    const auto& mc = std::get<MultipleChoiceItem>(item);
    j["type"] = "multiple_choice";
    j["id"] = mc.id;
    j["topic"] = std::string(to_string(mc.topic));
    j["difficulty"] = mc.difficulty;
    j["relevance"] = mc.relevance;
    j["status"] = std::string(to_string(mc.status));
    j["stem"] = mc.stem;
    ojson choices = ojson::array();
    for (const auto& c : mc.choices) {
        ojson cj;
        cj["label"] = std::string(1, c.label);
        cj["text"] = c.text;
        choices.push_back(std::move(cj));
    }
    j["choices"] = std::move(choices);
    j["reference_answer"] = std::string(1, mc.reference_answer);
    j["history"] = history_json(mc.history);
    return j;
}

TestItem item_from(const RecordReader& rec) {
    const std::string type = rec.str("type");
    if (type == "code_explanation") {
        CodeExplanationItem ce;
        ce.id = rec.str("id");
        ce.topic = rec.enumerated("topic", kTopics);
        ce.difficulty = rec.integer("difficulty");
        ce.relevance = rec.integer("relevance");
        ce.status = rec.enumerated("status", kStatuses);
        ce.code = rec.str("code");
        ce.reference_explanation = rec.str("reference_explanation");
        ce.history = history_from(rec);
        return ce;
    }
    if (type == "multiple_choice") {
        MultipleChoiceItem mc;
        mc.id = rec.str("id");
        mc.topic = rec.enumerated("topic", kTopics);
        mc.difficulty = rec.integer("difficulty");
        mc.relevance = rec.integer("relevance");
        mc.status = rec.enumerated("status", kStatuses);
        mc.stem = rec.str("stem");
        const auto& arr = rec.raw("choices");
        if (!arr.is_array()) rec.fail("choices", "expected an array");
        for (std::size_t i = 0; i < arr.size(); ++i) {
            RecordReader c(arr[i], rec.where() + ": choices[" + std::to_string(i) + "]");
            mc.choices.push_back({c.letter("label"), c.str("text")});
        }
        mc.reference_answer = rec.letter("reference_answer");
        mc.history = history_from(rec);
        return mc;
    }
    rec.fail("type", "unknown item type '" + type + "'");
}

} // namespace

std::string_view to_string(Topic t) { return name_of(kTopics, t); }
std::string_view to_string(Status s) { return name_of(kStatuses, s); }
std::string_view to_string(ReviewAction a) { return name_of(kActions, a); }

const std::string& item_id(const TestItem& item) {
    return std::visit([](const auto& i) -> const std::string& { return i.id; }, item);
}

Status item_status(const TestItem& item) {
    return std::visit([](const auto& i) { return i.status; }, item);
}

std::vector<Violation> validate_item(const TestItem& item) {
    std::vector<Violation> out;
    if (item_id(item).empty()) out.push_back({"empty_id", "item id is empty"});
    if (const auto* ce = std::get_if<CodeExplanationItem>(&item)) {
        if (text::trim(ce->code).empty()) out.push_back({"empty_code", "code is empty"});
        if (text::trim(ce->reference_explanation).empty())
            out.push_back({"empty_reference", "reference explanation is empty"});
        check_scale(out, "difficulty", ce->difficulty);
        check_scale(out, "relevance", ce->relevance);
        return out;
    }
    const auto& mc = std::get<MultipleChoiceItem>(item);
    if (text::trim(mc.stem).empty()) out.push_back({"empty_stem", "question stem is empty"});
    if (mc.choices.size() < 2)
        out.push_back({"too_few_choices", std::to_string(mc.choices.size()) + " choices, need 2..6"});
    if (mc.choices.size() > 6)
        out.push_back({"too_many_choices", std::to_string(mc.choices.size()) + " choices, need 2..6"});
    for (std::size_t i = 0; i < mc.choices.size(); ++i) {
        const char expected = static_cast<char>('A' + i);
        if (mc.choices[i].label != expected) {
            out.push_back({"labels_not_consecutive", std::string("choice ") + std::to_string(i) +
                                                         " labeled '" + mc.choices[i].label +
                                                         "', expected '" + expected + "'"});
            break;
        }
    }
    for (const auto& c : mc.choices) {
        if (text::trim(c.text).empty()) {
            out.push_back({"empty_choice", std::string("choice ") + c.label + " is empty"});
            break;
        }
    }
    const bool assigned = std::any_of(mc.choices.begin(), mc.choices.end(),
                                      [&](const Choice& c) { return c.label == mc.reference_answer; });
    if (!assigned)
        out.push_back({"label_out_of_range", std::string("reference answer '") +
                                                 mc.reference_answer + "' is not a choice label"});
    check_scale(out, "difficulty", mc.difficulty);
    check_scale(out, "relevance", mc.relevance);
    return out;
}

std::string render_prompt(const TestItem& item) {
    if (item_status(item) == Status::dropped)
        throw Error("ItemDropped", "item " + item_id(item) + " was dropped in review");
    if (auto v = validate_item(item); !v.empty())
        throw Error("InvalidItem", "item " + item_id(item) + ": " + v.front().code);
    if (const auto* ce = std::get_if<CodeExplanationItem>(&item)) {
        std::string code = ce->code;
        if (!code.empty() && code.back() == '\n') code.pop_back();
        return kCodePrompt + "<vhdl>\n" + code + "\n</vhdl>\n";
    }
    const auto& mc = std::get<MultipleChoiceItem>(item);
    std::string out = text::trim(mc.stem) + "\n\nChoose exactly one answer from the following:\n";
    for (const auto& c : mc.choices) out += std::string(1, c.label) + ". " + c.text + "\n";
    return out;
}

bool fits_context(const TestItem& item, const tokenizer::Tokenizer& tok, std::size_t limit,
                  std::size_t reserved_output_budget) {
    return tok.encode(render_prompt(item)).size() + reserved_output_budget <= limit;
}

void apply_review(TestItem& item, const ReviewEvent& event, const std::optional<TestItem>& revised) {
    if (event.item_id != item_id(item))
        throw Error("InvalidReview", "event for " + event.item_id + " applied to " + item_id(item));
    if (event.reviewer.empty()) throw Error("InvalidReview", "reviewer is required");
    if (event.action != ReviewAction::approve && text::trim(event.note).empty())
        throw Error("InvalidReview", std::string(to_string(event.action)) + " requires a note");
    if (revised) {
        if (event.action != ReviewAction::edit)
            throw Error("InvalidReview", "only an edit may carry a revised item");
        if (revised->index() != item.index() || item_id(*revised) != item_id(item))
            throw Error("InvalidReview", "revised item must keep the id and type");
    }

    auto history = std::visit([](auto& i) { return std::move(i.history); }, item);
    if (revised) item = *revised;
    history.push_back(event);
    std::visit(
        [&](auto& i) {
            i.history = std::move(history);
            switch (event.action) {
            case ReviewAction::approve:
                i.status = Status::reviewed;
                break;
            case ReviewAction::edit:
                i.status = Status::edited;
                break;
            case ReviewAction::drop:
                i.status = Status::dropped;
                break;
            }
        },
        item);
}

std::vector<TestItem> parse_set(std::string_view input, const std::string& source) {
    std::vector<TestItem> items;
    bool have_header = false;
    std::size_t lineno = 0;
    for (const auto& line : text::split(input, '\n')) {
        ++lineno;
        if (text::trim(line).empty()) continue;
        const std::string where = source + ":" + std::to_string(lineno);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw Error("ParseError", where + ": " + e.what());
        }
        RecordReader rec(j, where);
        if (!have_header) {
            if (rec.str("format") != kFormat) rec.fail("format", "not a test-set file");
            if (rec.integer("schema_version") != kSchemaVersion)
                rec.fail("schema_version", "unsupported version");
            have_header = true;
            continue;
        }
        items.push_back(item_from(rec));
    }
    if (!have_header) throw Error("ParseError", source + ": field 'schema_version': missing header");
    return items;
}

std::string format_set(std::vector<TestItem> items) {
    std::stable_sort(items.begin(), items.end(),
                     [](const TestItem& a, const TestItem& b) { return item_id(a) < item_id(b); });
    ojson header;
    header["format"] = std::string(kFormat);
    header["schema_version"] = kSchemaVersion;
    std::string out = header.dump() + "\n";
    for (const auto& item : items) out += item_json(item).dump() + "\n";
    return out;
}

std::vector<TestItem> import_set(const std::string& path) {
    return parse_set(text::read_file(path), path);
}

void export_set(const std::string& path, const std::vector<TestItem>& items) {
    text::write_file(path, format_set(items));
}

SetSummary summarize(const std::vector<TestItem>& items) {
    SetSummary s;
    for (const auto& item : items) {
        if (item_status(item) == Status::dropped) {
            ++s.dropped;
        } else if (std::holds_alternative<CodeExplanationItem>(item)) {
            ++s.code_explanation;
        } else {
            ++s.multiple_choice;
        }
    }
    return s;
}

} // namespace vhdlx::testset
