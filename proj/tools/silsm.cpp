#include <httplib.h>
#include <signal.h>
#include <unistd.h>

#include <CLI11.hpp>
#include <atomic>
#include <iostream>
#include <thread>

#include "silsm/cli.hpp"
#include "silsm/session_service.hpp"

namespace {

int serve(const std::optional<std::string>& config_file, const std::optional<std::string>& listen,
          const std::optional<std::string>& data_dir) {
    using namespace silsm;
    ServiceConfig cfg;
    try {
        cfg = load_service_config(config_file ? std::optional<std::filesystem::path>(*config_file) : std::nullopt);
        if (listen) {
            const auto colon = listen->rfind(':');
            if (colon == std::string::npos) throw ParameterError("--listen must be host:port");
            cfg.host = listen->substr(0, colon);
            cfg.port = std::stoi(listen->substr(colon + 1));
        }
        if (data_dir) cfg.data_dir = *data_dir;
    } catch (const std::exception& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return kExitUsage;
    }

    // Block termination signals in every thread; a dedicated thread waits for them.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    SessionStore store(cfg);
    const std::size_t loaded = store.load_all();
    httplib::Server server;
    install_routes(server, store);
    // Exclusive bind: the library default (SO_REUSEPORT) would let a second instance share the port.
    server.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    if (!server.bind_to_port(cfg.host, cfg.port)) {
        std::cerr << "error: cannot listen on " << cfg.host << ":" << cfg.port << "\n";
        return kExitRuntime;
    }
    std::cerr << "silsm: listening on " << cfg.host << ":" << cfg.port << ", data " << cfg.data_dir << ", "
              << loaded << " session(s) restored\n";

    std::atomic<bool> signalled{false};
    std::thread waiter([&server, &signalled, signals]() {
        int sig = 0;
        sigwait(&signals, &sig);
        signalled = true;
        server.stop();
    });
    server.listen_after_bind();
    store.flush();
    // listen may end without a signal; wake the waiter so it can be joined.
    if (!signalled) kill(getpid(), SIGTERM);
    waiter.join();
    std::cerr << "silsm: stopped\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Interactive level-set segmentation"};
    app.require_subcommand(1);

    silsm::RunManifest manifest;
    std::string image, script, out;
    std::optional<std::string> gt;
    std::optional<double> dt, mu, alpha, lambda1, lambda2, eps;
    std::optional<int> steps;
    std::optional<std::string> c1_scope;
    auto* seg = app.add_subcommand("segment", "Replay an interaction script on an image");
    seg->add_option("--image", image, "Input image (PNG or binary PGM)")->required();
    seg->add_option("--script", script, "Interaction script JSON")->required();
    seg->add_option("--out", out, "Output directory")->required();
    seg->add_option("--gt", gt, "Ground-truth mask image");
    seg->add_option("--dt", dt, "Time step");
    seg->add_option("--steps", steps, "Steps per round");
    seg->add_option("--mu", mu, "Regularization weight");
    seg->add_option("--alpha", alpha, "Biharmonic weight");
    seg->add_option("--lambda1", lambda1, "Foreground fit weight");
    seg->add_option("--lambda2", lambda2, "Background fit weight");
    seg->add_option("--eps", eps, "Heaviside/Dirac smoothing");
    seg->add_option("--c1-scope", c1_scope, "Foreground mean over 'interested' (default) or 'whole' domain");
    seg->add_option("--snapshot-every", manifest.snapshot_every, "Write phi snapshots every N steps");

    std::string selector;
    std::optional<std::string> report;
    auto* val = app.add_subcommand("validate", "Run validation experiments");
    val->add_option("selector", selector, "energy|collapse|reconstitution|ablation|inequality|metrics|heaviside|all")
        ->required();
    val->add_option("--out", report, "Write the JSON report to this file");

    std::optional<std::string> config_file, listen, data_dir;
    auto* srv = app.add_subcommand("serve", "Start the HTTP session service");
    srv->add_option("--config", config_file, "JSON config file");
    srv->add_option("--listen", listen, "host:port");
    srv->add_option("--data-dir", data_dir, "Session storage directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return silsm::kExitUsage;
    }

    if (*seg) {
        manifest.image = image;
        manifest.script = script;
        manifest.out = out;
        if (gt) manifest.ground_truth = *gt;
        auto& o = manifest.param_overrides;
        if (dt) o["dt"] = *dt;
        if (steps) o["steps_per_round"] = *steps;
        if (mu) o["mu"] = *mu;
        if (alpha) o["alpha"] = *alpha;
        if (lambda1) o["lambda1"] = *lambda1;
        if (lambda2) o["lambda2"] = *lambda2;
        if (eps) o["eps"] = *eps;
        if (c1_scope) o["c1_scope"] = *c1_scope;
        return silsm::cmd_segment(manifest, std::cerr);
    }
    if (*val) return silsm::cmd_validate(selector, report, std::cout, std::cerr);
    return serve(config_file, listen, data_dir);
}
