#pragma once

// HTTP search service: POST /search, POST /scrape, GET /health.
// Request handling lives in SearchService so the in-process tool registry
// and the HTTP server share one code path.

#include <atomic>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <utility>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "searchgym/errors.hpp"
#include "searchgym/remote.hpp"
#include "searchgym/retrieval.hpp"
#include "searchgym/text.hpp"

namespace searchgym {

struct ServerConfig {
    int port = 8080;
    std::string host = "127.0.0.1";
    std::string index_path;
    PipelineConfig pipeline;
    std::size_t max_query_chars = 512;

    void validate() const {
        if (port < 0 || port > 65535) throw InvalidConfigError("port must be within [1, 65535] (0 picks any)");
        if (max_query_chars < 1) throw InvalidConfigError("max_query_chars must be at least 1");
        pipeline.validate();
    }
};

namespace detail {

inline HttpReply json_reply(int status, const nlohmann::ordered_json& body) {
    return HttpReply{status, body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)};
}

inline HttpReply error_reply(int status, std::string_view code) {
    nlohmann::ordered_json body;
    body["error"] = code;
    return json_reply(status, body);
}

}  // namespace detail

class SearchService {
public:
    SearchService(std::shared_ptr<const VectorIndex> index, PipelineConfig pipeline, std::size_t max_query_chars = 512)
        : index_(std::move(index)), pipeline_(std::move(pipeline)), max_query_chars_(max_query_chars) {
        if (!index_) throw InvalidConfigError("search service needs an index");
        pipeline_.validate();
    }

    const VectorIndex& index() const noexcept { return *index_; }
    const PipelineConfig& pipeline() const noexcept { return pipeline_; }

    HttpReply search(const nlohmann::json& request) const {
        if (!request.is_object()) return detail::error_reply(400, "bad_request");
        auto q = request.find("query");
        if (q == request.end()) return detail::error_reply(400, "empty_query");
        if (!q->is_string()) return detail::error_reply(400, "bad_request");
        const std::string_view query = trim_ascii(q->get_ref<const std::string&>());
        if (query.empty()) return detail::error_reply(400, "empty_query");
        if (utf8::code_points(query) > max_query_chars_) return detail::error_reply(400, "query_too_long");

        PipelineConfig config = pipeline_;
        if (auto k = request.find("top_k"); k != request.end()) {
            if (!k->is_number_integer()) return detail::error_reply(400, "bad_top_k");
            const auto requested = k->get<std::int64_t>();
            if (requested < 1 || requested > static_cast<std::int64_t>(pipeline_.top_m)) {
                return detail::error_reply(400, "bad_top_k");
            }
            config.top_k = std::min(static_cast<std::size_t>(requested), pipeline_.top_k);
        }

        std::vector<SearchResult> results;
        try {
            results = search_pipeline(*index_, query, config);
        } catch (const RemoteUnavailableError&) {
            return detail::error_reply(503, pipeline_.reranker == RerankerKind::remote ? "reranker_unavailable"
                                                                                       : "embedder_unavailable");
        }
        nlohmann::ordered_json body;
        body["results"] = nlohmann::ordered_json::array();
        for (const auto& r : results) {
            nlohmann::ordered_json item;
            item["doc_id"] = r.doc_id;
            item["title"] = r.title;
            item["preview"] = r.preview;
            item["score"] = r.score;
            body["results"].push_back(std::move(item));
        }
        return detail::json_reply(200, body);
    }

    HttpReply scrape(const nlohmann::json& request) const {
        if (!request.is_object()) return detail::error_reply(400, "bad_request");
        auto id = request.find("doc_id");
        if (id == request.end() || !id->is_string() || id->get_ref<const std::string&>().empty()) {
            return detail::error_reply(400, "missing_doc_id");
        }
        const Document* doc = index_->find(id->get_ref<const std::string&>());
        if (!doc) return detail::error_reply(404, "unknown_doc_id");
        nlohmann::ordered_json body;
        body["doc_id"] = doc->doc_id;
        body["title"] = doc->title;
        body["text"] = doc->text;
        return detail::json_reply(200, body);
    }

    HttpReply health() const {
        nlohmann::ordered_json body;
        body["status"] = "ok";
        body["corpus_size"] = index_->size();
        body["dim"] = index_->dim();
        return detail::json_reply(200, body);
    }

private:
    std::shared_ptr<const VectorIndex> index_;
    PipelineConfig pipeline_;
    std::size_t max_query_chars_;
};

/// Wraps httplib. Answers 503 on every route until a service is installed.
class SearchServer {
public:
    using RequestLogger = std::function<void(const std::string& method, const std::string& path, int status)>;

    SearchServer() { install_routes(); }
    ~SearchServer() { stop(); }

    SearchServer(const SearchServer&) = delete;
    SearchServer& operator=(const SearchServer&) = delete;

    void set_service(std::shared_ptr<const SearchService> service) {
        std::lock_guard lock(mutex_);
        service_ = std::move(service);
    }

    void set_logger(RequestLogger logger) {
        server_.set_logger([logger = std::move(logger)](const httplib::Request& req, const httplib::Response& res) {
            logger(req.method, req.path, res.status);
        });
    }

    /// Binds without serving. Port 0 picks a free port. Returns the bound port or -1.
    int bind(const std::string& host, int port) {
        port_ = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
        return port_;
    }

    /// Blocks until stop().
    bool serve() { return server_.listen_after_bind(); }

    void start() {
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    void stop() {
        if (server_.is_running()) server_.stop();
        if (thread_.joinable()) thread_.join();
    }

    int port() const noexcept { return port_; }

private:
    std::shared_ptr<const SearchService> current() const {
        std::lock_guard lock(mutex_);
        return service_;
    }

    static void write(httplib::Response& res, const HttpReply& reply) {
        res.status = reply.status;
        res.set_content(reply.body, "application/json");
    }

    template <typename Handler>
    void post_route(const std::string& path, Handler handler) {
        server_.Post(path, [this, handler](const httplib::Request& req, httplib::Response& res) {
            auto service = current();
            if (!service) return write(res, detail::error_reply(503, "loading"));
            auto body = nlohmann::json::parse(req.body, nullptr, false);
            if (body.is_discarded()) return write(res, detail::error_reply(400, "bad_request"));
            write(res, handler(*service, body));
        });
    }

    void install_routes() {
        post_route("/search", [](const SearchService& s, const nlohmann::json& b) { return s.search(b); });
        post_route("/scrape", [](const SearchService& s, const nlohmann::json& b) { return s.scrape(b); });
        server_.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
            auto service = current();
            if (!service) {
                nlohmann::ordered_json body;
                body["status"] = "loading";
                return write(res, detail::json_reply(503, body));
            }
            write(res, service->health());
        });
    }

    httplib::Server server_;
    mutable std::mutex mutex_;
    std::shared_ptr<const SearchService> service_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace searchgym
