// Serves a recorded concept-API fixture on localhost for offline runs.
#include <csignal>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "mkg/testing/recorded_kg_server.hpp"

namespace {
volatile std::sig_atomic_t g_stop = 0;
}

int main(int argc, char** argv) {
    CLI::App app{"kg_fixture_server: replay a recorded concept API"};
    std::string fixture;
    int port = 8765;
    int latency_ms = 0;
    app.add_option("fixture", fixture, "fixture JSON file")->required()->check(CLI::ExistingFile);
    app.add_option("-p,--port", port, "port on 127.0.0.1")->capture_default_str();
    app.add_option("--latency-ms", latency_ms, "delay added to every response")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    auto server = mkg::testing::RecordedKgServer::from_file(fixture);
    server->set_latency(std::chrono::milliseconds(latency_ms));
    server->start(port);
    std::cout << "serving " << fixture << " at " << server->base_url() << std::endl;

    std::signal(SIGINT, [](int) { g_stop = 1; });
    std::signal(SIGTERM, [](int) { g_stop = 1; });
    while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server->stop();
    return 0;
}
