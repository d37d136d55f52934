#include <gtest/gtest.h>

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <regex>
#include <thread>

#include "mkg/llm_gateway.hpp"
#include "test_support.hpp"

using namespace mkg;
using nlohmann::json;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no mkg::Error thrown";
    return ErrorCode::ContractViolation;
}

CompletionRequest request_for(TemplateId id, std::string prompt) {
    return {id, std::move(prompt), "m", 0.0, 16};
}

class LocalChatServer {
public:
    LocalChatServer() {
        server_.Post("/v1/chat", [this](const httplib::Request& req, httplib::Response& res) {
            ++calls_;
            last_body_ = req.body;
            last_auth_ = req.get_header_value("Authorization");
            if (fail_remaining_ > 0) {
                --fail_remaining_;
                res.status = 429;
                return;
            }
            res.set_content(R"({"choices":[{"message":{"content":"Answer: B"}}]})", "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LocalChatServer() {
        server_.stop();
        thread_.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat"; }

    std::atomic<int> calls_{0};
    std::atomic<int> fail_remaining_{0};
    std::string last_body_;
    std::string last_auth_;

private:
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
};

} // namespace

TEST(PromptTemplate, SubstitutesAllBindings) {
    TemplateLibrary lib;
    std::string out = render_prompt(lib, TemplateId::FinalReasoning,
                                    {{"question", "Q"}, {"options", "A) one"}, {"knowledge", "S"}});
    EXPECT_NE(out.find("Q"), std::string::npos);
    EXPECT_NE(out.find("A) one"), std::string::npos);
    EXPECT_NE(out.find("S"), std::string::npos);
    EXPECT_EQ(out.find("{question}"), std::string::npos);
}

TEST(PromptTemplate, MissingBindingNamesPlaceholder) {
    TemplateLibrary lib;
    try {
        render_prompt(lib, TemplateId::ExtractFromQuestion, {});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnboundPlaceholder);
        EXPECT_FALSE(e.detail().empty());
    }
}

TEST(PromptTemplate, RenderIsDeterministic) {
    TemplateLibrary lib;
    Bindings b{{"question", "x"}, {"options", "y"}, {"language", "ja"}};
    EXPECT_EQ(render_prompt(lib, TemplateId::SelfMining, b), render_prompt(lib, TemplateId::SelfMining, b));
}

TEST(PromptTemplate, SinglePassAndEscapes) {
    PromptTemplate t(TemplateId::FinalReasoning, "{{literal}} {question}|{options}|{knowledge}");
    EXPECT_EQ(t.render({{"question", "{options}"}, {"options", "o"}, {"knowledge", "k"}}),
              "{literal} {options}|o|k");
    EXPECT_EQ(t.placeholders(), (std::vector<std::string>{"question", "options", "knowledge"}));
}

TEST(PromptTemplate, RejectsUndeclaredOrBrokenPlaceholders) {
    EXPECT_EQ(code_of([] { PromptTemplate(TemplateId::FinalReasoning, "{language}"); }),
              ErrorCode::InvalidTemplate);
    EXPECT_EQ(code_of([] { PromptTemplate(TemplateId::FinalReasoning, "{question"); }),
              ErrorCode::InvalidTemplate);
    EXPECT_EQ(code_of([] { PromptTemplate(TemplateId::FinalReasoning, "a } b"); }),
              ErrorCode::InvalidTemplate);
}

TEST(PromptTemplate, BuiltinsUseOnlyDeclaredPlaceholders) {
    for (TemplateId id : kAllTemplates) {
        PromptTemplate t(id, std::string(builtin_template_body(id)));
        const auto& declared = declared_placeholders(id);
        for (const auto& p : t.placeholders()) {
            EXPECT_NE(std::find(declared.begin(), declared.end(), p), declared.end()) << p;
        }
        EXPECT_EQ(t.placeholders().size(), declared.size()) << template_name(id);
    }
}

TEST(PromptTemplate, UnknownNameRejected) {
    TemplateLibrary lib;
    EXPECT_EQ(code_of([&] { render_prompt(lib, "summarize", {}); }), ErrorCode::UnknownTemplate);
    EXPECT_EQ(template_id_from_name("declarative_convert"), TemplateId::DeclarativeConvert);
}

TEST(TemplateLibrary, DirectoryOverridesSubset) {
    test::TempDir dir;
    test::spit(dir / "final_reasoning.txt", "K={knowledge} Q={question} O={options}");
    auto lib = TemplateLibrary::from_directory(dir.path());
    EXPECT_EQ(render_prompt(lib, TemplateId::FinalReasoning, {{"question", "q"}, {"options", "o"}, {"knowledge", "k"}}),
              "K=k Q=q O=o");
    EXPECT_EQ(lib.get(TemplateId::SelfMining).body(), builtin_template_body(TemplateId::SelfMining));
}

TEST(ScriptedMock, EchoesScript) {
    ScriptedMockBackend mock(std::vector<ScriptEntry>{{"", "X", {}}});
    EXPECT_EQ(mock.complete(request_for(TemplateId::FinalReasoning, "p")), "X");
    EXPECT_EQ(mock.remaining(), 0u);
    EXPECT_EQ(code_of([&] { mock.complete(request_for(TemplateId::FinalReasoning, "p")); }),
              ErrorCode::MockScriptExhausted);
}

TEST(ScriptedMock, FifoPerTemplateAndMatch) {
    ScriptedMockBackend mock({{"final_reasoning", "first", {}},
                              {"self_mining", "mined", {}},
                              {"final_reasoning", "second", {}},
                              {"final_reasoning", "special", {"needle", "pin"}}});
    EXPECT_EQ(mock.complete(request_for(TemplateId::FinalReasoning, "has needle and pin")), "first");
    EXPECT_EQ(mock.complete(request_for(TemplateId::FinalReasoning, "needle only")), "second");
    EXPECT_EQ(code_of([&] { mock.complete(request_for(TemplateId::FinalReasoning, "needle only")); }),
              ErrorCode::MockScriptExhausted);
    EXPECT_EQ(mock.complete(request_for(TemplateId::FinalReasoning, "pin, needle")), "special");
    EXPECT_EQ(mock.complete(request_for(TemplateId::SelfMining, "")), "mined");
    EXPECT_EQ(mock.transcript().size(), 4u);
}

TEST(ScriptedMock, SharedScriptConsumedInCallOrder) {
    auto backend = std::make_shared<ScriptedMockBackend>(
        std::vector<ScriptEntry>{{"", "1", {}}, {"", "2", {}}, {"", "3", {}}, {"", "4", {}}});
    auto lib = std::make_shared<TemplateLibrary>();
    LlmGateway one(backend, lib), two(backend, lib);
    Bindings b{{"question", "q"}, {"options", "o"}, {"knowledge", "k"}};
    EXPECT_EQ(one.run(TemplateId::FinalReasoning, b), "1");
    EXPECT_EQ(two.run(TemplateId::FinalReasoning, b), "2");
    EXPECT_EQ(two.run(TemplateId::FinalReasoning, b), "3");
    EXPECT_EQ(one.run(TemplateId::FinalReasoning, b), "4");
}

TEST(ScriptedMock, ParsesScriptLines) {
    auto entries = ScriptedMockBackend::parse_script(
        "{\"expect_template\":\"self_mining\",\"response\":\"r\",\"match\":\"m\"}\n\n"
        "{\"response\":\"s\",\"match\":[\"a\",\"b\"]}\n");
    ASSERT_EQ(entries.size(), 2u);
    EXPECT_EQ(entries[0].match, (std::vector<std::string>{"m"}));
    EXPECT_EQ(entries[1].match, (std::vector<std::string>{"a", "b"}));
    EXPECT_EQ(code_of([] { ScriptedMockBackend::parse_script("{\"response\":1}"); }), ErrorCode::ConfigError);
    EXPECT_EQ(code_of([] { ScriptedMockBackend::parse_script("{\"expect_template\":\"x\",\"response\":\"r\"}"); }),
              ErrorCode::UnknownTemplate);
}

TEST(Gateway, SendsGenerationSettings) {
    auto backend = std::make_shared<ScriptedMockBackend>(std::vector<ScriptEntry>{{"", "ok", {}}});
    LlmGateway gw(backend, std::make_shared<TemplateLibrary>(), {"some-model", 0.0, 77});
    gw.run(TemplateId::SelfMining, {{"question", "q"}, {"options", "o"}, {"language", "ko"}});
    auto t = backend->transcript();
    ASSERT_EQ(t.size(), 1u);
    EXPECT_EQ(t[0].template_id, TemplateId::SelfMining);
    EXPECT_EQ(t[0].model_id, "some-model");
    EXPECT_EQ(t[0].max_tokens, 77);
    EXPECT_EQ(t[0].temperature, 0.0);
}

TEST(HttpChat, ReadsCompletionAndSendsKey) {
    LocalChatServer server;
    HttpChatBackend backend({server.url(), "secret", "/choices/0/message/content", {}});
    EXPECT_EQ(backend.complete(request_for(TemplateId::FinalReasoning, "prompt text")), "Answer: B");
    EXPECT_EQ(server.last_auth_, "Bearer secret");
    json body = json::parse(server.last_body_);
    EXPECT_EQ(body["model"], "m");
    EXPECT_EQ(body["messages"][0]["content"], "prompt text");
}

TEST(HttpChat, RetriesRateLimitWithBackoff) {
    LocalChatServer server;
    server.fail_remaining_ = 2;
    std::vector<std::chrono::milliseconds> waits;
    RetryPolicy retry;
    retry.attempts = 3;
    retry.initial_backoff = std::chrono::milliseconds(10);
    retry.sleep = [&](std::chrono::milliseconds d) { waits.push_back(d); };
    HttpChatBackend backend({server.url(), "", "/choices/0/message/content", retry});
    EXPECT_EQ(backend.complete(request_for(TemplateId::FinalReasoning, "p")), "Answer: B");
    EXPECT_EQ(server.calls_.load(), 3);
    EXPECT_EQ(waits, (std::vector<std::chrono::milliseconds>{std::chrono::milliseconds(10),
                                                              std::chrono::milliseconds(20)}));
}

TEST(HttpChat, UnreachableEndpointIsBackendUnavailable) {
    int port;
    {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
    }
    RetryPolicy retry;
    retry.attempts = 2;
    retry.timeout = std::chrono::milliseconds(500);
    int sleeps = 0;
    retry.sleep = [&](std::chrono::milliseconds) { ++sleeps; };
    HttpChatBackend backend({"http://127.0.0.1:" + std::to_string(port) + "/v1/chat", "", "/x", retry});
    EXPECT_EQ(code_of([&] { backend.complete(request_for(TemplateId::FinalReasoning, "p")); }),
              ErrorCode::BackendUnavailable);
    EXPECT_EQ(sleeps, 1);
}

// Pipeline stages must go through LlmGateway; only the gateway builds requests.
TEST(Architecture, OnlyGatewayBuildsCompletionRequests) {
    const std::regex construct(R"(CompletionRequest\s*(\w+\s*)?[{(])");
    const auto src = std::filesystem::path(MKG_SOURCE_DIR) / "src";
    ASSERT_TRUE(std::regex_search(test::slurp(src / "llm_gateway.cpp"), construct));
    std::vector<std::string> offenders;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(src)) {
        if (!entry.is_regular_file()) continue;
        auto name = entry.path().filename().string();
        if (name == "llm_gateway.cpp") continue;
        std::string content = test::slurp(entry.path());
        if (std::regex_search(content, construct)) offenders.push_back(name);
    }
    EXPECT_TRUE(offenders.empty()) << offenders.front();
}
