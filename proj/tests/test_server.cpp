#include <gtest/gtest.h>

#include <future>
#include <set>

#include "searchgym/server.hpp"
#include "searchgym/synthetic.hpp"
#include "test_support.hpp"

using namespace searchgym;

namespace {

std::shared_ptr<const SearchService> make_service(std::size_t n_docs = 60, PipelineConfig pipeline = {}) {
    EmbedderConfig embedder;
    embedder.dim = 128;
    const auto world = make_synthetic_world(n_docs, 0, 31);
    auto index = std::make_shared<const VectorIndex>(build_index(world.corpus, embedder));
    return std::make_shared<const SearchService>(index, pipeline, 512);
}

nlohmann::json body_of(const HttpReply& r) { return nlohmann::json::parse(r.body); }

}  // namespace

TEST(SearchService, ValidQueryDefaults) {
    const auto service = make_service();
    const auto reply = service->search({{"query", "was born in the old city"}});
    ASSERT_EQ(reply.status, 200);
    const auto body = body_of(reply);
    ASSERT_TRUE(body["results"].is_array());
    EXPECT_LE(body["results"].size(), 10u);
    EXPECT_EQ(body["results"].size(), 10u);
    for (const auto& r : body["results"]) {
        EXPECT_LE(utf8::code_points(r["preview"].get<std::string>()), 150u);
        const Document& d = service->index().document(r["doc_id"].get<std::string>());
        EXPECT_EQ(d.text.rfind(r["preview"].get<std::string>(), 0), 0u);
    }
}

TEST(SearchService, CompactFieldOrderAndNoTrailingNewline) {
    std::vector<Document> docs{{"d1", "Red Fox", "the red fox"}};
    EmbedderConfig e;
    e.dim = 16;
    SearchService service(std::make_shared<const VectorIndex>(build_index(docs, e)), PipelineConfig{});
    EXPECT_EQ(service.search({{"query", "red fox"}}).body,
              R"({"results":[{"doc_id":"d1","title":"Red Fox","preview":"the red fox","score":1.0}]})");
    EXPECT_EQ(service.scrape({{"doc_id", "d1"}}).body, R"({"doc_id":"d1","title":"Red Fox","text":"the red fox"})");
    EXPECT_EQ(service.health().body, R"({"status":"ok","corpus_size":1,"dim":16})");
}

TEST(SearchService, QueryValidation) {
    const auto service = make_service();
    auto error_of = [](const HttpReply& r) { return nlohmann::json::parse(r.body)["error"].get<std::string>(); };
    EXPECT_EQ(service->search({{"query", ""}}).status, 400);
    EXPECT_EQ(error_of(service->search({{"query", ""}})), "empty_query");
    EXPECT_EQ(error_of(service->search({{"query", " \t\n "}})), "empty_query");
    EXPECT_EQ(error_of(service->search(nlohmann::json::object())), "empty_query");
    EXPECT_EQ(error_of(service->search({{"query", std::string(513, 'q')}})), "query_too_long");
    EXPECT_EQ(service->search({{"query", "  " + std::string(512, 'q') + "  "}}).status, 200);
    EXPECT_EQ(error_of(service->search({{"query", "q"}, {"top_k", 0}})), "bad_top_k");
    EXPECT_EQ(error_of(service->search({{"query", "q"}, {"top_k", 16}})), "bad_top_k");
    EXPECT_EQ(error_of(service->search({{"query", "q"}, {"top_k", "3"}})), "bad_top_k");
    EXPECT_EQ(error_of(service->search({{"query", 5}})), "bad_request");
}

TEST(SearchService, TopKIsAPrefixOfTheDefaultResponse) {
    const auto service = make_service();
    for (const char* q : {"q", "old city", "people work"}) {
        const auto full = body_of(service->search({{"query", q}, {"top_k", 10}}))["results"];
        const auto three = body_of(service->search({{"query", q}, {"top_k", 3}}))["results"];
        ASSERT_LE(three.size(), 3u);
        for (std::size_t i = 0; i < three.size(); ++i) EXPECT_EQ(three[i], full[i]);
    }
}

TEST(SearchService, NeverExceedsConfiguredTopK) {
    const auto service = make_service();
    EXPECT_LE(body_of(service->search({{"query", "old"}, {"top_k", 15}}))["results"].size(), 10u);
}

TEST(SearchService, ScrapeReturnsFullDocument) {
    const auto service = make_service();
    const Document& d = service->index().corpus()[3];
    const auto body = body_of(service->scrape({{"doc_id", d.doc_id}}));
    EXPECT_EQ(body["text"], d.text);
    EXPECT_GT(utf8::code_points(d.text), 0u);
    const auto missing = service->scrape({{"doc_id", "nope"}});
    EXPECT_EQ(missing.status, 404);
    EXPECT_EQ(missing.body, R"({"error":"unknown_doc_id"})");
    EXPECT_EQ(service->scrape(nlohmann::json::object()).status, 400);
    EXPECT_EQ(service->scrape({{"doc_id", ""}}).status, 400);
}

TEST(SearchService, EverySearchedIdIsScrapeableAndResponsesAreStable) {
    const auto service = make_service(200);
    for (const auto& d : service->index().corpus()) {
        const auto first = service->search({{"query", d.title}});
        const auto second = service->search({{"query", d.title}});
        EXPECT_EQ(first.body, second.body);
        for (const auto& r : body_of(first)["results"]) {
            EXPECT_EQ(service->scrape({{"doc_id", r["doc_id"]}}).status, 200);
        }
    }
}

TEST(SearchService, RemoteRerankerDownIs503) {
    PipelineConfig pipeline;
    pipeline.reranker = RerankerKind::remote;
    pipeline.endpoint = searchgym::testing::dead_url();
    pipeline.timeout = std::chrono::seconds(2);
    const auto service = make_service(20, pipeline);
    const auto reply = service->search({{"query", "old"}});
    EXPECT_EQ(reply.status, 503);
    EXPECT_EQ(reply.body, R"({"error":"reranker_unavailable"})");
}

class SearchServerTest : public ::testing::Test {
protected:
    void SetUp() override {
        port_ = server_.bind("127.0.0.1", 0);
        ASSERT_GT(port_, 0);
        server_.start();
    }
    httplib::Client client() { return httplib::Client("127.0.0.1", port_); }

    SearchServer server_;
    int port_ = -1;
};

TEST_F(SearchServerTest, HealthIs503WhileLoadingThenOk) {
    auto c = client();
    // Deliberately slowed startup: the service is installed from another thread after a delay.
    auto loader = std::async(std::launch::async, [this] {
        std::this_thread::sleep_for(std::chrono::milliseconds(300));
        server_.set_service(make_service(3));
    });
    auto loading = c.Get("/health");
    ASSERT_TRUE(loading);
    EXPECT_EQ(loading->status, 503);
    auto early_search = c.Post("/search", R"({"query":"x"})", "application/json");
    ASSERT_TRUE(early_search);
    EXPECT_EQ(early_search->status, 503);
    loader.get();
    auto ready = c.Get("/health");
    ASSERT_TRUE(ready);
    EXPECT_EQ(ready->status, 200);
    const auto body = nlohmann::json::parse(ready->body);
    EXPECT_EQ(body["status"], "ok");
    EXPECT_EQ(body["corpus_size"], 3);
    EXPECT_EQ(ready->get_header_value("Content-Type"), "application/json");
}

TEST_F(SearchServerTest, SearchAndScrapeOverHttp) {
    const auto service = make_service(40);
    server_.set_service(service);
    auto c = client();
    const std::string title = service->index().corpus()[7].title;
    auto res = c.Post("/search", nlohmann::json{{"query", title}}.dump(), "application/json");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    EXPECT_EQ(res->body, service->search({{"query", title}}).body);
    const auto first = nlohmann::json::parse(res->body)["results"][0];
    EXPECT_EQ(first["doc_id"], service->index().corpus()[7].doc_id);

    auto scraped = c.Post("/scrape", nlohmann::json{{"doc_id", first["doc_id"]}}.dump(), "application/json");
    ASSERT_TRUE(scraped);
    EXPECT_EQ(scraped->status, 200);
    auto bad = c.Post("/search", "{not json", "application/json");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto empty = c.Post("/search", R"({"query":""})", "application/json");
    ASSERT_TRUE(empty);
    EXPECT_EQ(empty->status, 400);
    EXPECT_EQ(empty->body, R"({"error":"empty_query"})");
}

TEST_F(SearchServerTest, ConcurrentRequestsAgree) {
    const auto service = make_service(80);
    server_.set_service(service);
    std::vector<std::future<std::string>> futures;
    for (int i = 0; i < 16; ++i) {
        futures.push_back(std::async(std::launch::async, [this, i] {
            auto c = client();
            auto res = c.Post("/search", nlohmann::json{{"query", "old city " + std::to_string(i % 4)}}.dump(),
                              "application/json");
            return res ? res->body : std::string("failed");
        }));
    }
    for (int i = 0; i < 16; ++i) {
        EXPECT_EQ(futures[i].get(), service->search({{"query", "old city " + std::to_string(i % 4)}}).body);
    }
}
