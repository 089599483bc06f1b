#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "searchgym/remote.hpp"
#include "searchgym/server.hpp"

namespace searchgym {

inline constexpr std::string_view kWebsearchTool = "websearch";
inline constexpr std::string_view kScrapeTool = "scrape";

struct ToolOutcome {
    bool ok = false;
    std::string content;
};

/// Name -> callable. Shared read-only across concurrent episodes.
class ToolRegistry {
public:
    using Tool = std::function<ToolOutcome(const nlohmann::json& args)>;

    void add(std::string name, Tool tool) { tools_[std::move(name)] = std::move(tool); }

    bool contains(std::string_view name) const { return tools_.find(name) != tools_.end(); }

    std::vector<std::string> names() const {
        std::vector<std::string> out;
        for (const auto& [name, _] : tools_) out.push_back(name);
        return out;
    }

    /// Never throws: unknown tools and tool exceptions become failed outcomes.
    ToolOutcome call(std::string_view name, const nlohmann::json& args) const {
        auto it = tools_.find(name);
        if (it == tools_.end()) return {false, "ERROR: unknown tool " + std::string(name)};
        try {
            return it->second(args);
        } catch (const std::exception& e) {
            return {false, std::string("ERROR: ") + e.what()};
        }
    }

private:
    std::map<std::string, Tool, std::less<>> tools_;
};

inline ToolOutcome outcome_from_reply(const HttpReply& reply) {
    return {reply.status == 200, reply.body};
}

/// websearch/scrape bound directly to an in-process service.
inline ToolRegistry make_local_tools(std::shared_ptr<const SearchService> service) {
    ToolRegistry registry;
    registry.add(std::string(kWebsearchTool),
                 [service](const nlohmann::json& args) { return outcome_from_reply(service->search(args)); });
    registry.add(std::string(kScrapeTool),
                 [service](const nlohmann::json& args) { return outcome_from_reply(service->scrape(args)); });
    return registry;
}

/// websearch/scrape bound to a running search server.
inline ToolRegistry make_http_tools(const std::string& base_url,
                                    std::chrono::milliseconds timeout = std::chrono::seconds(30)) {
    if (!is_well_formed_endpoint(base_url)) throw InvalidConfigError("malformed search server url: " + base_url);
    ToolRegistry registry;
    auto bind = [&](std::string_view tool, std::string path) {
        registry.add(std::string(tool), [base_url, path = std::move(path), timeout](const nlohmann::json& args) {
            return outcome_from_reply(post_json(base_url, path, args, timeout));
        });
    };
    bind(kWebsearchTool, "/search");
    bind(kScrapeTool, "/scrape");
    return registry;
}

}  // namespace searchgym
