#include "mkg/testing/recorded_kg_server.hpp"

#include <atomic>
#include <fstream>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "mkg/core.hpp"

namespace mkg::testing {

using nlohmann::json;

struct RecordedKgServer::Impl {
    json fixture;
    httplib::Server server;
    std::thread thread;
    int port = -1;
    std::atomic<int> search_calls{0};
    std::atomic<int> relation_calls{0};
    std::atomic<long long> latency_ms{0};
    std::mutex fail_mu;
    int fail_remaining = 0;
    int fail_status = 429;

    // Applies latency and injected failures; false when the request was failed.
    bool admit(httplib::Response& res) {
        if (auto ms = latency_ms.load(); ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(ms));
        std::lock_guard lock(fail_mu);
        if (fail_remaining > 0) {
            --fail_remaining;
            res.status = fail_status;
            res.set_content(R"({"error":"injected"})", "application/json");
            return false;
        }
        return true;
    }
};

RecordedKgServer::RecordedKgServer(const std::string& fixture_json) : impl_(std::make_unique<Impl>()) {
    impl_->fixture = json::parse(fixture_json);
    Impl* impl = impl_.get();

    impl->server.Get("/search", [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->search_calls;
        if (!impl->admit(res)) return;
        json hits = json::array();
        std::string term = req.get_param_value("string");
        if (!term.empty()) {
            const auto& search = impl->fixture.value("search", json::object());
            auto it = search.find(normalize_entity_key(term));
            if (it != search.end()) hits = *it;
        }
        res.set_content(hits.dump(), "application/json");
    });
    impl->server.Get(R"(/concepts/([^/]+)/relations)", [impl](const httplib::Request& req, httplib::Response& res) {
        ++impl->relation_calls;
        if (!impl->admit(res)) return;
        const auto& relations = impl->fixture.value("relations", json::object());
        auto it = relations.find(req.matches[1].str());
        if (it == relations.end()) {
            res.status = 404;
            return;
        }
        res.set_content(it->dump(), "application/json");
    });
}

std::unique_ptr<RecordedKgServer> RecordedKgServer::from_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read fixture " + path.string());
    std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return std::make_unique<RecordedKgServer>(content);
}

RecordedKgServer::~RecordedKgServer() { stop(); }

void RecordedKgServer::start(int port) {
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
    } else {
        impl_->port = impl_->server.bind_to_port("127.0.0.1", port) ? port : -1;
    }
    if (impl_->port < 0) throw std::runtime_error("recorded server could not bind");
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
}

void RecordedKgServer::stop() {
    if (!impl_) return;
    impl_->server.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

int RecordedKgServer::port() const { return impl_->port; }

std::string RecordedKgServer::base_url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

void RecordedKgServer::set_latency(std::chrono::milliseconds latency) { impl_->latency_ms = latency.count(); }

void RecordedKgServer::fail_next(int count, int status) {
    std::lock_guard lock(impl_->fail_mu);
    impl_->fail_remaining = count;
    impl_->fail_status = status;
}

int RecordedKgServer::search_calls() const { return impl_->search_calls; }
int RecordedKgServer::relation_calls() const { return impl_->relation_calls; }

void RecordedKgServer::reset_counters() {
    impl_->search_calls = 0;
    impl_->relation_calls = 0;
}

} // namespace mkg::testing
