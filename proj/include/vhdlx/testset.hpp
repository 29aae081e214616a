#pragma once

#include "vhdlx/tokenizer.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace vhdlx::testset {

enum class Topic { digital_design, isa, microarchitecture, vhdl_syntax, other };
enum class Status { drafted, reviewed, edited, dropped };
enum class ReviewAction { approve, edit, drop };

std::string_view to_string(Topic t);
std::string_view to_string(Status s);
std::string_view to_string(ReviewAction a);

struct ReviewEvent {
    std::string item_id;
    std::string reviewer;
    ReviewAction action = ReviewAction::approve;
    std::string timestamp;
    std::string note;

    bool operator==(const ReviewEvent&) const = default;
};

struct CodeExplanationItem {
    std::string id;
    Topic topic = Topic::other;
    int difficulty = 1;
    int relevance = 1;
    std::string code;
    std::string reference_explanation;
    Status status = Status::drafted;
    std::vector<ReviewEvent> history;

    bool operator==(const CodeExplanationItem&) const = default;
};

struct Choice {
    char label = 'A';
    std::string text;

    bool operator==(const Choice&) const = default;
};

struct MultipleChoiceItem {
    std::string id;
    std::string stem;
    std::vector<Choice> choices;
    char reference_answer = 'A';
    Topic topic = Topic::other;
    int difficulty = 1;
    int relevance = 1;
    Status status = Status::drafted;
    std::vector<ReviewEvent> history;

    bool operator==(const MultipleChoiceItem&) const = default;
};

using TestItem = std::variant<CodeExplanationItem, MultipleChoiceItem>;

const std::string& item_id(const TestItem& item);
Status item_status(const TestItem& item);

struct Violation {
    std::string code;  // e.g. "label_out_of_range", "empty_reference"
    std::string detail;

    bool operator==(const Violation&) const = default;
};

// Every violated rule, in a fixed order. Empty means valid.
std::vector<Violation> validate_item(const TestItem& item);

// Prompt text sent to the model. Errors: ItemDropped, InvalidItem.
std::string render_prompt(const TestItem& item);

inline constexpr std::size_t kDefaultContextLimit = 8192;
inline constexpr std::size_t kDefaultOutputBudget = 512;

// Prompt tokens plus the reserved output budget must not exceed the limit.
bool fits_context(const TestItem& item, const tokenizer::Tokenizer& tok,
                  std::size_t limit = kDefaultContextLimit,
                  std::size_t reserved_output_budget = kDefaultOutputBudget);

// Appends the event to the item's history and updates its status. An edit may carry the
// revised item (same id and type). Errors: InvalidReview.
void apply_review(TestItem& item, const ReviewEvent& event,
                  const std::optional<TestItem>& revised = std::nullopt);

// JSON lines: a header {"format":"vhdlx-testset","schema_version":1} then one item per line.
// Export sorts by id. Errors: ParseError with line and field.
std::vector<TestItem> parse_set(std::string_view text, const std::string& source = "<input>");
std::string format_set(std::vector<TestItem> items);
std::vector<TestItem> import_set(const std::string& path);
void export_set(const std::string& path, const std::vector<TestItem>& items);

struct SetSummary {
    std::size_t code_explanation = 0;
    std::size_t multiple_choice = 0;
    std::size_t dropped = 0;
};

// Counts exclude dropped items.
SetSummary summarize(const std::vector<TestItem>& items);

} // namespace vhdlx::testset
