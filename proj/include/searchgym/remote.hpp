#pragma once

// Minimal JSON-over-HTTP client used by the remote embedder, reranker and
// policy adapters.

#include <chrono>
#include <optional>
#include <string>
#include <string_view>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "searchgym/errors.hpp"

namespace searchgym {

struct Endpoint {
    std::string host_port;  // "http://host:port"
    std::string base_path;  // "" or "/prefix" without trailing slash
};

/// Accepts `http://host[:port][/path]`. Returns nullopt for anything else.
inline std::optional<Endpoint> parse_endpoint(std::string_view url) {
    constexpr std::string_view scheme = "http://";
    if (url.substr(0, scheme.size()) != scheme) return std::nullopt;
    std::string_view rest = url.substr(scheme.size());
    const auto slash = rest.find('/');
    std::string_view authority = rest.substr(0, slash);
    std::string_view path = slash == std::string_view::npos ? std::string_view{} : rest.substr(slash);
    while (!path.empty() && path.back() == '/') path.remove_suffix(1);
    if (authority.empty()) return std::nullopt;
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos) {
        std::string_view port = authority.substr(colon + 1);
        if (colon == 0 || port.empty() || port.size() > 5) return std::nullopt;
        long value = 0;
        for (char c : port) {
            if (c < '0' || c > '9') return std::nullopt;
            value = value * 10 + (c - '0');
        }
        if (value < 1 || value > 65535) return std::nullopt;
    }
    for (char c : authority) {
        if (c == ' ' || c == '@' || c == '?' || c == '#') return std::nullopt;
    }
    return Endpoint{std::string(scheme) + std::string(authority), std::string(path)};
}

inline bool is_well_formed_endpoint(std::string_view url) { return parse_endpoint(url).has_value(); }

struct HttpReply {
    int status = 0;
    std::string body;
};

/// POST a JSON body. Transport failures raise RemoteUnavailableError; the
/// status code is returned as-is.
inline HttpReply post_json(const std::string& url, const std::string& path, const nlohmann::json& body,
                           std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    auto endpoint = parse_endpoint(url);
    if (!endpoint) throw RemoteUnavailableError("malformed endpoint: " + url);
    httplib::Client client(endpoint->host_port);
    const auto secs = timeout.count() / 1000;
    const auto usecs = (timeout.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    auto res = client.Post(endpoint->base_path + path,
                           body.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace),
                           "application/json");
    if (!res) {
        throw RemoteUnavailableError("request to " + url + path + " failed: " + httplib::to_string(res.error()));
    }
    return HttpReply{res->status, res->body};
}

/// POST and require a 200 JSON object reply.
inline nlohmann::json post_json_ok(const std::string& url, const std::string& path, const nlohmann::json& body,
                                   std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    HttpReply reply = post_json(url, path, body, timeout);
    if (reply.status != 200) {
        throw RemoteUnavailableError(url + path + " returned status " + std::to_string(reply.status));
    }
    auto parsed = nlohmann::json::parse(reply.body, nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) {
        throw RemoteUnavailableError(url + path + " returned a non-object body");
    }
    return parsed;
}

}  // namespace searchgym
