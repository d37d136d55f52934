#include "mkg/llm_gateway.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "http_internal.hpp"
#include "mkg/error.hpp"

namespace mkg {

using nlohmann::json;

std::string_view template_name(TemplateId id) {
    switch (id) {
    case TemplateId::ExtractFromQuestion: return "extract_from_question";
    case TemplateId::ExtractFromOptions: return "extract_from_options";
    case TemplateId::DeclarativeConvert: return "declarative_convert";
    case TemplateId::FinalReasoning: return "final_reasoning";
    case TemplateId::SelfMining: return "self_mining";
    }
    return {};
}

TemplateId template_id_from_name(std::string_view name) {
    for (TemplateId id : kAllTemplates) {
        if (template_name(id) == name) return id;
    }
    throw Error(ErrorCode::UnknownTemplate, "no template named '" + std::string(name) + "'",
                std::string(name));
}

const std::vector<std::string>& declared_placeholders(TemplateId id) {
    static const std::vector<std::string> question{"question", "language", "max_entities"};
    static const std::vector<std::string> options{"options", "language"};
    static const std::vector<std::string> convert{"question", "options", "knowledge", "language"};
    static const std::vector<std::string> reasoning{"question", "options", "knowledge"};
    static const std::vector<std::string> mining{"question", "options", "language"};
    switch (id) {
    case TemplateId::ExtractFromQuestion: return question;
    case TemplateId::ExtractFromOptions: return options;
    case TemplateId::DeclarativeConvert: return convert;
    case TemplateId::FinalReasoning: return reasoning;
    case TemplateId::SelfMining: return mining;
    }
    throw Error(ErrorCode::UnknownTemplate, "unknown template id");
}

PromptTemplate::PromptTemplate(TemplateId id, std::string body) : id_(id), body_(std::move(body)) {
    const auto& declared = declared_placeholders(id);
    std::string literal;
    for (std::size_t i = 0; i < body_.size(); ++i) {
        char c = body_[i];
        if (c == '{' && i + 1 < body_.size() && body_[i + 1] == '{') {
            literal.push_back('{');
            ++i;
        } else if (c == '}' && i + 1 < body_.size() && body_[i + 1] == '}') {
            literal.push_back('}');
            ++i;
        } else if (c == '}') {
            throw Error(ErrorCode::InvalidTemplate, std::string(template_name(id)) + ": unmatched '}'");
        } else if (c == '{') {
            auto close = body_.find('}', i);
            if (close == std::string::npos) {
                throw Error(ErrorCode::InvalidTemplate,
                            std::string(template_name(id)) + ": unterminated placeholder");
            }
            std::string name = body_.substr(i + 1, close - i - 1);
            if (std::find(declared.begin(), declared.end(), name) == declared.end()) {
                throw Error(ErrorCode::InvalidTemplate,
                            std::string(template_name(id)) + ": undeclared placeholder {" + name + "}", name);
            }
            if (!literal.empty()) segments_.push_back({false, std::move(literal)});
            literal.clear();
            segments_.push_back({true, name});
            if (std::find(used_.begin(), used_.end(), name) == used_.end()) used_.push_back(name);
            i = close;
        } else {
            literal.push_back(c);
        }
    }
    if (!literal.empty()) segments_.push_back({false, std::move(literal)});
}

std::string PromptTemplate::render(const Bindings& bindings) const {
    for (const auto& name : used_) {
        if (bindings.find(name) == bindings.end()) {
            throw Error(ErrorCode::UnboundPlaceholder,
                        std::string(template_name(id_)) + " needs a binding for {" + name + "}", name);
        }
    }
    std::string out;
    for (const auto& seg : segments_) {
        out += seg.placeholder ? bindings.find(seg.text)->second : seg.text;
    }
    return out;
}

TemplateLibrary::TemplateLibrary() {
    for (TemplateId id : kAllTemplates) {
        templates_.emplace_back(id, std::string(builtin_template_body(id)));
    }
}

TemplateLibrary TemplateLibrary::from_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::ConfigError, "template directory not found: " + dir.string());
    }
    TemplateLibrary lib;
    for (TemplateId id : kAllTemplates) {
        auto file = dir / (std::string(template_name(id)) + ".txt");
        if (!std::filesystem::exists(file)) continue;
        std::ifstream in(file, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        lib.set(PromptTemplate(id, ss.str()));
    }
    return lib;
}

const PromptTemplate& TemplateLibrary::get(TemplateId id) const {
    return templates_.at(static_cast<std::size_t>(id));
}

void TemplateLibrary::set(PromptTemplate t) {
    templates_.at(static_cast<std::size_t>(t.id())) = std::move(t);
}

std::string render_prompt(const TemplateLibrary& lib, TemplateId id, const Bindings& bindings) {
    return lib.get(id).render(bindings);
}

std::string render_prompt(const TemplateLibrary& lib, std::string_view name, const Bindings& bindings) {
    return render_prompt(lib, template_id_from_name(name), bindings);
}

// --- HTTP backend ---------------------------------------------------------

HttpChatBackend::HttpChatBackend(ChatEndpointConfig config)
    : config_(std::move(config)), endpoint_(Endpoint::parse(config_.url)) {}

std::string HttpChatBackend::request_body(const CompletionRequest& request) {
    json body = {
        {"model", request.model_id},
        {"messages", json::array({{{"role", "user"}, {"content", request.rendered_prompt}}})},
        {"temperature", request.temperature},
        {"max_tokens", request.max_tokens},
    };
    return body.dump();
}

std::string HttpChatBackend::complete(const CompletionRequest& request) {
    auto client = detail::make_client(endpoint_, config_.retry);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.api_key);
    }
    const std::string body = request_body(request);
    const std::string path = endpoint_.path_prefix.empty() ? "/" : endpoint_.path_prefix;
    std::string response = detail::send_with_retries(
        config_.retry, [&] { return client.Post(path, headers, body, "application/json"); },
        ErrorCode::BackendUnavailable, "chat completion");
    try {
        json parsed = json::parse(response);
        return parsed.at(json::json_pointer(config_.response_pointer)).get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorCode::BackendUnavailable,
                    std::string("chat completion response unreadable: ") + e.what());
    }
}

// --- scripted mock --------------------------------------------------------

ScriptedMockBackend::ScriptedMockBackend(std::vector<ScriptEntry> script) {
    for (auto& e : script) script_.emplace_back(std::move(e));
}

std::vector<ScriptEntry> ScriptedMockBackend::parse_script(std::string_view jsonl) {
    std::vector<ScriptEntry> out;
    std::istringstream in{std::string(jsonl)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            json j = json::parse(line);
            ScriptEntry e;
            e.expect_template = j.value("expect_template", "");
            e.response = j.at("response").get<std::string>();
            if (j.contains("match")) {
                const json& m = j.at("match");
                if (m.is_string()) {
                    e.match.push_back(m.get<std::string>());
                } else {
                    e.match = m.get<std::vector<std::string>>();
                }
            }
            if (!e.expect_template.empty() && e.expect_template != "*") {
                template_id_from_name(e.expect_template);
            }
            out.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::ConfigError,
                        "mock script line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::unique_ptr<ScriptedMockBackend> ScriptedMockBackend::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::ConfigError, "cannot open mock script " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return std::make_unique<ScriptedMockBackend>(parse_script(ss.str()));
}

std::string ScriptedMockBackend::complete(const CompletionRequest& request) {
    std::lock_guard lock(mu_);
    const std::string_view tag = template_name(request.template_id);
    for (auto& slot : script_) {
        if (!slot) continue;
        const ScriptEntry& e = *slot;
        bool template_ok = e.expect_template.empty() || e.expect_template == "*" || e.expect_template == tag;
        bool match_ok = std::all_of(e.match.begin(), e.match.end(), [&](const std::string& m) {
            return request.rendered_prompt.find(m) != std::string::npos;
        });
        if (template_ok && match_ok) {
            std::string response = e.response;
            slot.reset();
            while (!script_.empty() && !script_.front()) script_.pop_front();
            transcript_.push_back(request);
            return response;
        }
    }
    throw Error(ErrorCode::MockScriptExhausted,
                "no scripted response left for template " + std::string(tag));
}

std::size_t ScriptedMockBackend::remaining() const {
    std::lock_guard lock(mu_);
    return static_cast<std::size_t>(
        std::count_if(script_.begin(), script_.end(), [](const auto& s) { return s.has_value(); }));
}

std::vector<CompletionRequest> ScriptedMockBackend::transcript() const {
    std::lock_guard lock(mu_);
    return transcript_;
}

// --- gateway --------------------------------------------------------------

LlmGateway::LlmGateway(std::shared_ptr<LlmBackend> backend, std::shared_ptr<const TemplateLibrary> templates,
                       GenerationSettings settings)
    : backend_(std::move(backend)), templates_(std::move(templates)), settings_(std::move(settings)) {
    if (!backend_ || !templates_) {
        throw Error(ErrorCode::ContractViolation, "LlmGateway needs a backend and templates");
    }
}

std::string LlmGateway::run(TemplateId id, const Bindings& bindings) const {
    CompletionRequest request{id, render_prompt(*templates_, id, bindings), settings_.model_id,
                              settings_.temperature, settings_.max_tokens};
    return backend_->complete(request);
}

} // namespace mkg
