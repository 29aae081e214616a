#include "vhdlx/judging.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <cctype>
#include <fstream>

namespace vhdlx::judging {
namespace {

constexpr std::string_view kJudgeHeader =
    "Below is a piece of VHDL code, a reference explanation produced by an expert that describes "
    "what the code is doing, and a model explanation that was produced by an AI model. You are "
    "required to evaluate whether the model explanation is similar to the reference explanation "
    "using a point system described below.\n"
    "- Give 5 points if the model explanation captures all the concepts expressed in the "
    "reference explanation\n"
    "- Give 4 points if the model explanation captures most of the concepts expressed in the "
    "reference explanation\n"
    "- Give 3 points if the model explanation captures the essential concepts expressed in the "
    "reference explanation\n"
    "- Give 2 points if the model explanation captures a minority of concepts expressed in the "
    "reference explanation\n"
    "- Give 1 point if the model explanation captures almost none of the concepts expressed in "
    "the reference explanation\n"
    "Here is the package consisting of the input code, the reference explanation, and the model "
    "explanation:\n";

constexpr std::string_view kJudgeFooter =
    "After examining the package:\n"
    "- Briefly justify your score, up to 100 words.\n"
    "- You must provide the score exactly using the following format: "
    "\"VHDL Code Explanation Score: <points>.\"\n";

bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

std::string strip_trailing_newline(std::string_view s) {
    std::string out(s);
    while (!out.empty() && (out.back() == '\n' || out.back() == '\r')) out.pop_back();
    return out;
}

struct ScoreHit {
    std::size_t marker_pos;
    long value;
};

// Last marker occurrence followed (after spaces, quotes or emphasis) by an integer.
std::optional<ScoreHit> find_score(std::string_view out) {
    std::size_t pos = out.rfind(kScoreMarker);
    while (pos != std::string_view::npos) {
        std::size_t i = pos + kScoreMarker.size();
        while (i < out.size() && (out[i] == ' ' || out[i] == '\t' || out[i] == '*' || out[i] == '"'))
            ++i;
        if (i < out.size() && std::isdigit(static_cast<unsigned char>(out[i]))) {
            long value = 0;
            std::size_t digits = 0;
            while (i < out.size() && std::isdigit(static_cast<unsigned char>(out[i])) && digits < 9) {
                value = value * 10 + (out[i] - '0');
                ++i;
                ++digits;
            }
            if (i < out.size() && std::isdigit(static_cast<unsigned char>(out[i]))) value = -1;
            if (i + 1 < out.size() && out[i] == '.' && std::isdigit(static_cast<unsigned char>(out[i + 1])))
                value = -1;  // fractional scores are not on the scale
            return ScoreHit{pos, value};
        }
        if (pos == 0) break;
        pos = out.rfind(kScoreMarker, pos - 1);
    }
    return std::nullopt;
}

} // namespace

std::string build_judge_prompt(std::string_view code, std::string_view reference_explanation,
                               std::string_view model_explanation) {
    if (text::trim(code).empty()) throw Error("EmptyField", "code is empty");
    if (text::trim(reference_explanation).empty())
        throw Error("EmptyField", "reference explanation is empty");
    if (text::trim(model_explanation).empty()) throw Error("EmptyField", "model explanation is empty");

    std::string out(kJudgeHeader);
    out += "Input code:\n<vhdl>\n" + strip_trailing_newline(code) + "\n</vhdl>\n";
    out += "Reference explanation:\n" + strip_trailing_newline(reference_explanation) + "\n";
    out += "Model explanation:\n" + strip_trailing_newline(model_explanation) + "\n";
    out += kJudgeFooter;
    return out;
}

int parse_judge_score(std::string_view judge_output) {
    const auto hit = find_score(judge_output);
    if (!hit) throw Error("MarkerMissing", "no \"" + std::string(kScoreMarker) + " <n>\" in judge output");
    if (hit->value < 1 || hit->value > 5)
        throw Error("ScoreOutOfRange", "judge score outside 1..5");
    return static_cast<int>(hit->value);
}

std::size_t justification_word_count(std::string_view justification) {
    std::size_t words = 0;
    bool in_word = false;
    for (char c : justification) {
        const bool space = std::isspace(static_cast<unsigned char>(c)) != 0;
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

JudgeVerdict parse_verdict(std::string_view judge_output, std::string item_id, std::string model_id) {
    JudgeVerdict v;
    v.item_id = std::move(item_id);
    v.model_id = std::move(model_id);
    v.score = parse_judge_score(judge_output);
    v.justification = text::trim(judge_output.substr(0, find_score(judge_output)->marker_pos));
    return v;
}

std::optional<char> extract_choice(std::string_view completion, const testset::MultipleChoiceItem& item) {
    if (item.choices.empty()) return std::nullopt;
    const char last = static_cast<char>('A' + item.choices.size() - 1);
    for (std::size_t i = 0; i < completion.size(); ++i) {
        const char c = completion[i];
        if (c < 'A' || c > last) continue;
        const bool left_ok = i == 0 || !is_alnum(completion[i - 1]);
        const bool right_ok = i + 1 == completion.size() || !is_alnum(completion[i + 1]);
        if (left_ok && right_ok) return c;
    }
    return std::nullopt;
}

MCResult grade_mc(std::string_view completion, const testset::MultipleChoiceItem& item,
                  std::string model_id) {
    MCResult r;
    r.item_id = item.id;
    r.model_id = std::move(model_id);
    r.extracted = extract_choice(completion, item);
    r.correct = r.extracted && *r.extracted == item.reference_answer;
    return r;
}

double mc_accuracy(std::span<const MCResult> results) {
    if (results.empty()) throw Error("EmptyInput", "no multiple-choice results");
    std::size_t correct = 0;
    for (const auto& r : results) correct += r.correct ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(results.size());
}

void ResultLog::append_line(const nlohmann::ordered_json& j) const {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error("IoError", "cannot append to " + path_);
    out << j.dump() << "\n";
    out.flush();
    if (!out) throw Error("IoError", "short write to " + path_);
}

void ResultLog::append(const JudgeVerdict& v, const std::string& run_id) const {
    nlohmann::ordered_json j;
    j["kind"] = "judge_verdict";
    j["run_id"] = run_id;
    j["model_id"] = v.model_id;
    j["item_id"] = v.item_id;
    j["score"] = v.score;
    j["justification"] = v.justification;
    append_line(j);
}

void ResultLog::append(const MCResult& r, const std::string& run_id) const {
    nlohmann::ordered_json j;
    j["kind"] = "mc_result";
    j["run_id"] = run_id;
    j["model_id"] = r.model_id;
    j["item_id"] = r.item_id;
    j["extracted"] = r.extracted ? nlohmann::ordered_json(std::string(1, *r.extracted)) : nlohmann::ordered_json(nullptr);
    j["correct"] = r.correct;
    append_line(j);
}

std::vector<nlohmann::json> ResultLog::records() const {
    std::vector<nlohmann::json> out;
    std::ifstream in(path_);
    std::string line;
    while (std::getline(in, line)) {
        if (!text::trim(line).empty()) out.push_back(nlohmann::json::parse(line));
    }
    return out;
}

} // namespace vhdlx::judging
