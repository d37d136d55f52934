#pragma once

#include <array>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mkg/http.hpp"

namespace mkg {

enum class TemplateId {
    ExtractFromQuestion,
    ExtractFromOptions,
    DeclarativeConvert,
    FinalReasoning,
    SelfMining,
};

inline constexpr std::array<TemplateId, 5> kAllTemplates = {
    TemplateId::ExtractFromQuestion, TemplateId::ExtractFromOptions, TemplateId::DeclarativeConvert,
    TemplateId::FinalReasoning, TemplateId::SelfMining};

/// Snake-case name, also the asset file stem ("final_reasoning").
std::string_view template_name(TemplateId id);
/// Throws UnknownTemplate.
TemplateId template_id_from_name(std::string_view name);

/// Placeholder names a template may use.
const std::vector<std::string>& declared_placeholders(TemplateId id);

using Bindings = std::map<std::string, std::string, std::less<>>;

/// A prompt body with `{name}` placeholders. `{{` and `}}` produce literal braces.
class PromptTemplate {
public:
    /// Throws InvalidTemplate when the body uses an undeclared placeholder or
    /// has an unterminated brace.
    PromptTemplate(TemplateId id, std::string body);

    TemplateId id() const { return id_; }
    const std::string& body() const { return body_; }
    /// Placeholders in order of first appearance.
    const std::vector<std::string>& placeholders() const { return used_; }

    /// Single pass: bound values are inserted verbatim and never re-expanded.
    /// Throws UnboundPlaceholder(name) for the first missing binding.
    std::string render(const Bindings& bindings) const;

private:
    struct Segment {
        bool placeholder;
        std::string text;  // literal text or placeholder name
    };
    TemplateId id_;
    std::string body_;
    std::vector<Segment> segments_;
    std::vector<std::string> used_;
};

/// The five prompt templates. Starts from the built-in bodies; a directory of
/// `<template_name>.txt` files overrides any subset of them.
class TemplateLibrary {
public:
    TemplateLibrary();

    static TemplateLibrary from_directory(const std::filesystem::path& dir);

    const PromptTemplate& get(TemplateId id) const;
    void set(PromptTemplate t);

private:
    std::vector<PromptTemplate> templates_;
};

std::string_view builtin_template_body(TemplateId id);

std::string render_prompt(const TemplateLibrary& lib, TemplateId id, const Bindings& bindings);
/// Name-based lookup; throws UnknownTemplate for names outside the five.
std::string render_prompt(const TemplateLibrary& lib, std::string_view template_name,
                          const Bindings& bindings);

struct CompletionRequest {
    TemplateId template_id;
    std::string rendered_prompt;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
};

class LlmBackend {
public:
    virtual ~LlmBackend() = default;
    virtual std::string complete(const CompletionRequest& request) = 0;
};

struct ChatEndpointConfig {
    std::string url;  // full URL of the chat-completion route
    std::string api_key;
    // JSON pointer to the completion text in the response body.
    std::string response_pointer = "/choices/0/message/content";
    RetryPolicy retry;
};

/// OpenAI-style chat completion over HTTP(S).
class HttpChatBackend : public LlmBackend {
public:
    explicit HttpChatBackend(ChatEndpointConfig config);
    std::string complete(const CompletionRequest& request) override;

    /// The JSON body sent for a request.
    static std::string request_body(const CompletionRequest& request);

private:
    ChatEndpointConfig config_;
    Endpoint endpoint_;
};

struct ScriptEntry {
    std::string expect_template;  // template name, or "" / "*" for any
    std::string response;
    std::vector<std::string> match;  // optional: prompt must contain every one of these
};

/// Replays scripted completions. A request consumes the earliest unconsumed
/// entry whose template (and optional match texts) fit; all callers share one
/// queue guarded by a mutex. Match texts let concurrent pipelines pick their
/// own responses regardless of scheduling.
class ScriptedMockBackend : public LlmBackend {
public:
    explicit ScriptedMockBackend(std::vector<ScriptEntry> script);

    /// One JSON object per line: {"expect_template", "response"} plus an
    /// optional "match" string or list of strings.
    static std::unique_ptr<ScriptedMockBackend> from_file(const std::filesystem::path& path);
    static std::vector<ScriptEntry> parse_script(std::string_view jsonl);

    std::string complete(const CompletionRequest& request) override;

    std::size_t remaining() const;
    /// Requests answered so far, in call order.
    std::vector<CompletionRequest> transcript() const;

private:
    mutable std::mutex mu_;
    std::deque<std::optional<ScriptEntry>> script_;
    std::vector<CompletionRequest> transcript_;
};

struct GenerationSettings {
    std::string model_id = "gpt-4o-mini";
    double temperature = 0.0;
    int max_tokens = 1024;
};

/// The only way pipeline stages talk to a model: render one of the five
/// templates and send it.
class LlmGateway {
public:
    LlmGateway(std::shared_ptr<LlmBackend> backend, std::shared_ptr<const TemplateLibrary> templates,
               GenerationSettings settings = {});

    std::string run(TemplateId id, const Bindings& bindings) const;

    const TemplateLibrary& templates() const { return *templates_; }

private:
    std::shared_ptr<LlmBackend> backend_;
    std::shared_ptr<const TemplateLibrary> templates_;
    GenerationSettings settings_;
};

} // namespace mkg
