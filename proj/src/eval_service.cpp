#include "vhdlx/eval_service.hpp"

#include "vhdlx/error.hpp"
#include "vhdlx/text.hpp"

#include <httplib.h>

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <mutex>
#include <set>

namespace vhdlx::eval_service {
namespace {

constexpr std::string_view kLogFormat = "vhdlx-eval-log";
constexpr int kLogVersion = 1;

Response error_response(int status, std::string message) {
    Response r;
    r.status = status;
    r.body["error"] = std::move(message);
    return r;
}

Response ok() {
    Response r;
    r.body["status"] = "ok";
    return r;
}

bool nonempty_string(const nlohmann::json& j, const char* key) {
    return j.contains(key) && j[key].is_string() && !j[key].get<std::string>().empty();
}

// Returns an error message, or nothing when the record is well formed.
std::optional<std::string> check_rating(const nlohmann::json& body) {
    if (!body.is_object()) return "body must be an object";
    for (const char* key : {"rater", "item", "model"})
        if (!nonempty_string(body, key)) return std::string("field '") + key + "' must be a non-empty string";
    if (!body.contains("scores") || !body["scores"].is_object()) return "field 'scores' must be an object";
    const auto& scores = body["scores"];
    for (const auto& [name, value] : scores.items()) {
        if (std::find(analytics::kCategories.begin(), analytics::kCategories.end(), name) ==
            analytics::kCategories.end())
            return "unknown category '" + name + "'";
        if (!value.is_number_integer()) return "score for '" + name + "' must be an integer";
        const auto v = value.get<long long>();
        if (v < 1 || v > 5) return "score for '" + name + "' outside 1..5";
    }
    for (auto category : analytics::kCategories)
        if (!scores.contains(std::string(category))) return "missing category '" + std::string(category) + "'";
    if (body.contains("comment") && !body["comment"].is_null() && !body["comment"].is_string())
        return "field 'comment' must be a string";
    return std::nullopt;
}

std::optional<std::string> check_feedback(const nlohmann::json& body) {
    if (!body.is_object()) return "body must be an object";
    if (!body.contains("verdict") || !body["verdict"].is_string()) return "field 'verdict' is required";
    const auto v = body["verdict"].get<std::string>();
    if (v != "up" && v != "down") return "verdict must be 'up' or 'down'";
    if (body.contains("session") && !body["session"].is_string()) return "field 'session' must be a string";
    if (body.contains("comment") && !body["comment"].is_null() && !body["comment"].is_string())
        return "field 'comment' must be a string";
    return std::nullopt;
}

nlohmann::ordered_json pair_json(const AssignedPair& p) {
    nlohmann::ordered_json j;
    j["item"] = p.item;
    j["model"] = p.model;
    return j;
}

} // namespace

std::map<std::string, RaterAssignment> parse_assignments(const nlohmann::json& j) {
    std::map<std::string, RaterAssignment> out;
    try {
        for (const auto& r : j.at("raters")) {
            RaterAssignment a;
            a.rater = r.at("id").get<std::string>();
            if (a.rater.empty()) throw Error("InvalidAssignments", "empty rater id");
            if (r.contains("token") && !r["token"].is_null()) a.token = r["token"].get<std::string>();
            std::set<AssignedPair> seen;
            for (const auto& p : r.value("pairs", nlohmann::json::array())) {
                AssignedPair pair{p.at("item").get<std::string>(), p.at("model").get<std::string>()};
                if (pair.item.empty() || pair.model.empty())
                    throw Error("InvalidAssignments", a.rater + ": empty item or model id");
                if (!seen.insert(pair).second)
                    throw Error("InvalidAssignments", a.rater + ": duplicate pair " + pair.item + "/" + pair.model);
                a.pairs.push_back(std::move(pair));
            }
            const std::string id = a.rater;
            if (!out.emplace(id, std::move(a)).second) throw Error("InvalidAssignments", "duplicate rater " + id);
        }
    } catch (const nlohmann::json::exception& ex) {
        throw Error("InvalidAssignments", ex.what());
    }
    return out;
}

std::map<std::string, RaterAssignment> load_assignments(const std::string& path) {
    try {
        return parse_assignments(nlohmann::json::parse(text::read_file(path)));
    } catch (const nlohmann::json::parse_error& ex) {
        throw Error("InvalidAssignments", path + ": " + ex.what());
    }
}

// ---- store -------------------------------------------------------------------------------

EvalStore::EvalStore(std::string log_path, std::map<std::string, RaterAssignment> assignments)
    : log_path_(std::move(log_path)), assignments_(std::move(assignments)) {
    replay();
    fd_ = ::open(log_path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
    if (fd_ < 0) throw Error("IoError", "cannot open " + log_path_ + ": " + std::strerror(errno));
    if (events_ == 0 && ::lseek(fd_, 0, SEEK_END) == 0) {
        nlohmann::ordered_json header;
        header["format"] = kLogFormat;
        header["version"] = kLogVersion;
        append_event(header);
    }
}

EvalStore::~EvalStore() {
    if (fd_ >= 0) ::close(fd_);
}

void EvalStore::replay() {
    std::ifstream in(log_path_, std::ios::binary);
    if (!in) return;
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (content.empty()) return;

    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::size_t good_end = 0;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break;  // torn tail from an interrupted write
        const std::string line = content.substr(pos, nl - pos);
        ++line_no;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error("CorruptLog", log_path_ + ":" + std::to_string(line_no) + ": unreadable event");
        }
        if (line_no == 1) {
            if (j.value("format", std::string{}) != kLogFormat || j.value("version", 0) != kLogVersion)
                throw Error("CorruptLog", log_path_ + ": missing or unsupported log header");
        } else {
            apply(j);
        }
        pos = nl + 1;
        good_end = pos;
    }
    if (good_end != content.size()) {
        if (::truncate(log_path_.c_str(), static_cast<off_t>(good_end)) != 0)
            throw Error("IoError", "cannot truncate torn tail of " + log_path_);
    }
}

void EvalStore::apply(const nlohmann::json& event) {
    const auto type = event.value("type", std::string{});
    if (type == "rating") {
        RatingRecord r;
        r.rater = event.at("rater").get<std::string>();
        r.item = event.at("item").get<std::string>();
        r.model = event.at("model").get<std::string>();
        for (const auto& [name, value] : event.at("scores").items()) r.scores[name] = value.get<int>();
        if (event.contains("comment") && event["comment"].is_string()) r.comment = event["comment"].get<std::string>();
        r.timestamp = event.value("timestamp", std::string{});
        ratings_[{r.rater, r.item, r.model}] = std::move(r);
    } else if (type == "feedback") {
        if (event.at("verdict").get<std::string>() == "up") {
            ++feedback_.up;
        } else {
            ++feedback_.down;
        }
        feedback_.ratio = static_cast<double>(feedback_.up) / static_cast<double>(feedback_.up + feedback_.down);
    } else {
        throw Error("CorruptLog", "unknown event type '" + type + "'");
    }
    ++events_;
}

void EvalStore::append_event(const nlohmann::ordered_json& event) {
    const std::string line = event.dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
        const auto n = ::write(fd_, line.data() + written, line.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw Error("IoError", "write to " + log_path_ + " failed: " + std::strerror(errno));
        }
        written += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw Error("IoError", "fsync of " + log_path_ + " failed: " + std::strerror(errno));
}

std::optional<Response> EvalStore::check_token(const std::string& rater,
                                               const std::optional<std::string>& bearer) const {
    auto it = assignments_.find(rater);
    if (it == assignments_.end()) return error_response(404, "unknown rater '" + rater + "'");
    if (it->second.token && bearer != it->second.token) return error_response(401, "missing or wrong bearer token");
    return std::nullopt;
}

Response EvalStore::get_assignment(const std::string& rater, const std::optional<std::string>& bearer) const {
    if (auto err = check_token(rater, bearer)) return *err;
    std::shared_lock lock(mu_);
    const auto& a = assignments_.at(rater);
    Response r;
    r.body["rater"] = rater;
    r.body["pending"] = nlohmann::ordered_json::array();
    r.body["completed"] = nlohmann::ordered_json::array();
    for (const auto& p : a.pairs) {
        const bool done = ratings_.contains({rater, p.item, p.model});
        r.body[done ? "completed" : "pending"].push_back(pair_json(p));
    }
    return r;
}

Response EvalStore::post_rating(const nlohmann::json& body, const std::optional<std::string>& bearer) {
    if (auto msg = check_rating(body)) return error_response(422, *msg);
    const auto rater = body["rater"].get<std::string>();
    if (auto err = check_token(rater, bearer)) return *err;
    const AssignedPair pair{body["item"].get<std::string>(), body["model"].get<std::string>()};
    const auto& pairs = assignments_.at(rater).pairs;
    if (std::find(pairs.begin(), pairs.end(), pair) == pairs.end())
        return error_response(409, "pair " + pair.item + "/" + pair.model + " is not assigned to " + rater);

    nlohmann::ordered_json event;
    event["type"] = "rating";
    event["rater"] = rater;
    event["item"] = pair.item;
    event["model"] = pair.model;
    event["scores"] = nlohmann::ordered_json::object();
    for (auto category : analytics::kCategories)
        event["scores"][std::string(category)] = body["scores"][std::string(category)].get<int>();
    if (body.contains("comment") && body["comment"].is_string()) event["comment"] = body["comment"];
    event["timestamp"] = text::utc_timestamp();

    std::unique_lock lock(mu_);
    append_event(event);
    apply(nlohmann::json::parse(event.dump()));
    return ok();
}

Response EvalStore::post_feedback(const nlohmann::json& body) {
    if (auto msg = check_feedback(body)) return error_response(422, *msg);
    nlohmann::ordered_json event;
    event["type"] = "feedback";
    event["session"] = body.value("session", std::string{});
    event["verdict"] = body["verdict"];
    if (body.contains("comment") && body["comment"].is_string()) event["comment"] = body["comment"];
    event["timestamp"] = text::utc_timestamp();

    std::unique_lock lock(mu_);
    append_event(event);
    apply(nlohmann::json::parse(event.dump()));
    return ok();
}

FeedbackSummary EvalStore::feedback_summary() const {
    std::shared_lock lock(mu_);
    return feedback_;
}

Response EvalStore::get_feedback_summary() const {
    const auto s = feedback_summary();
    Response r;
    r.body["up"] = s.up;
    r.body["down"] = s.down;
    r.body["ratio"] = s.ratio ? nlohmann::ordered_json(*s.ratio) : nlohmann::ordered_json(nullptr);
    return r;
}

analytics::ScoreTable EvalStore::model_scores() const {
    std::map<std::string, std::vector<analytics::CategoryScores>> by_model;
    {
        std::shared_lock lock(mu_);
        for (const auto& [key, rec] : ratings_) by_model[rec.model].push_back(rec.scores);
    }
    analytics::ScoreTable t;
    t.raters = {"SME"};
    for (const auto& [model, items] : by_model) {
        t.models.push_back(model);
        t.cells.push_back({analytics::model_sme_score(items)});
    }
    return t;
}

Response EvalStore::get_model_scores() const {
    Response r;
    r.body = analytics::to_json(model_scores());
    return r;
}

std::size_t EvalStore::event_count() const {
    std::shared_lock lock(mu_);
    return events_;
}

Response handle(EvalStore& store, const std::string& method, const std::string& path, const std::string& body,
                const std::optional<std::string>& bearer) {
    auto parse_body = [&]() -> std::optional<nlohmann::json> {
        try {
            return nlohmann::json::parse(body);
        } catch (const nlohmann::json::parse_error&) {
            return std::nullopt;
        }
    };
    constexpr std::string_view kAssignments = "/assignments/";
    if (path.starts_with(kAssignments)) {
        if (method != "GET") return error_response(405, "method not allowed");
        const std::string rater = path.substr(kAssignments.size());
        if (rater.empty() || rater.find('/') != std::string::npos) return error_response(404, "not found");
        return store.get_assignment(rater, bearer);
    }
    if (path == "/ratings" || path == "/feedback") {
        if (method != "POST") return error_response(405, "method not allowed");
        const auto j = parse_body();
        if (!j) return error_response(422, "body is not valid JSON");
        return path == "/ratings" ? store.post_rating(*j, bearer) : store.post_feedback(*j);
    }
    if (path == "/feedback/summary" || path == "/reports/model-scores") {
        if (method != "GET") return error_response(405, "method not allowed");
        return path == "/feedback/summary" ? store.get_feedback_summary() : store.get_model_scores();
    }
    return error_response(404, "not found");
}

// ---- HTTP server --------------------------------------------------------------------------

struct Server::Impl {
    EvalStore& store;
    httplib::Server http;

    explicit Impl(EvalStore& s) : store(s) {
        auto route = [this](const httplib::Request& req, httplib::Response& res) {
            std::optional<std::string> bearer;
            const auto auth = req.get_header_value("Authorization");
            if (auth.starts_with("Bearer ")) bearer = auth.substr(7);
            Response r;
            try {
                r = handle(store, req.method, req.path, req.body, bearer);
            } catch (const std::exception& ex) {
                r = error_response(500, ex.what());
            }
            res.status = r.status;
            res.set_content(r.body.dump(), "application/json");
        };
        http.Get(R"(/.*)", route);
        http.Post(R"(/.*)", route);
    }
};

Server::Server(EvalStore& store) : impl_(std::make_unique<Impl>(store)) {}
Server::~Server() = default;

bool Server::listen(const std::string& host, int port) { return impl_->http.listen(host, port); }
int Server::bind_any(const std::string& host) { return impl_->http.bind_to_any_port(host); }
bool Server::listen_after_bind() { return impl_->http.listen_after_bind(); }
void Server::stop() { impl_->http.stop(); }
void Server::wait_until_ready() const { impl_->http.wait_until_ready(); }

} // namespace vhdlx::eval_service
