#pragma once

#include "vhdlx/analytics.hpp"

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

namespace vhdlx::eval_service {

struct RatingRecord {
    std::string rater;
    std::string item;
    std::string model;
    analytics::CategoryScores scores;
    std::optional<std::string> comment;
    std::string timestamp;
};

enum class Verdict { up, down };

struct FeedbackEvent {
    std::string session;
    Verdict verdict = Verdict::up;
    std::optional<std::string> comment;
    std::string timestamp;
};

struct AssignedPair {
    std::string item;
    std::string model;
    auto operator<=>(const AssignedPair&) const = default;
};

struct RaterAssignment {
    std::string rater;
    std::optional<std::string> token;  // bearer token; none means open access
    std::vector<AssignedPair> pairs;
};

// {"raters":[{"id":"r1","token":"...","pairs":[{"item":"ce-001","model":"base"}]}]}
// Errors: InvalidAssignments (duplicate rater or pair, empty ids).
std::map<std::string, RaterAssignment> parse_assignments(const nlohmann::json& j);
std::map<std::string, RaterAssignment> load_assignments(const std::string& path);

struct FeedbackSummary {
    std::size_t up = 0;
    std::size_t down = 0;
    std::optional<double> ratio;  // up / (up + down)
};

// An HTTP-shaped result so the store can be driven without a socket.
struct Response {
    int status = 200;
    nlohmann::ordered_json body;
};

// Rating and feedback state rebuilt from an append-only JSON-lines log. The first line of the
// log names the format and version. Writes are flushed and fsynced before they are acknowledged.
class EvalStore {
public:
    EvalStore(std::string log_path, std::map<std::string, RaterAssignment> assignments);
    ~EvalStore();
    EvalStore(const EvalStore&) = delete;
    EvalStore& operator=(const EvalStore&) = delete;

    // bearer: the token presented by the client, if any.
    Response get_assignment(const std::string& rater, const std::optional<std::string>& bearer) const;
    Response post_rating(const nlohmann::json& body, const std::optional<std::string>& bearer);
    Response post_feedback(const nlohmann::json& body);
    Response get_feedback_summary() const;
    Response get_model_scores() const;

    FeedbackSummary feedback_summary() const;
    analytics::ScoreTable model_scores() const;
    std::size_t event_count() const;

private:
    void replay();
    void append_event(const nlohmann::ordered_json& event);
    void apply(const nlohmann::json& event);
    std::optional<Response> check_token(const std::string& rater, const std::optional<std::string>& bearer) const;

    std::string log_path_;
    int fd_ = -1;
    std::map<std::string, RaterAssignment> assignments_;
    mutable std::shared_mutex mu_;
    std::map<std::tuple<std::string, std::string, std::string>, RatingRecord> ratings_;
    FeedbackSummary feedback_;
    std::size_t events_ = 0;
};

// Parses a request body and dispatches by method and path. Useful in tests and behind the server.
Response handle(EvalStore& store, const std::string& method, const std::string& path,
                const std::string& body, const std::optional<std::string>& bearer);

class Server {
public:
    explicit Server(EvalStore& store);
    ~Server();

    // Binds and serves until stop(). Returns false when the port cannot be bound.
    bool listen(const std::string& host, int port);
    // Binds to an ephemeral port and returns it, or -1.
    int bind_any(const std::string& host);
    bool listen_after_bind();
    void stop();
    void wait_until_ready() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

} // namespace vhdlx::eval_service
