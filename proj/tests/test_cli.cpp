#include <doctest.h>

#include <httplib.h>
#include <arpa/inet.h>
#include <netinet/in.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <filesystem>
#include <sstream>
#include <thread>

#include "silsm/cli.hpp"
#include "silsm/image_io.hpp"
#include "silsm/validation.hpp"

using namespace silsm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int dir_counter = 0;

struct Workspace {
    fs::path root;
    fs::path image, gt, script;
    Workspace() {
        root = fs::temp_directory_path() / ("silsm_cli_" + std::to_string(::getpid()) + "_" + std::to_string(++dir_counter));
        fs::remove_all(root);
        fs::create_directories(root);
        image = root / "nested.png";
        gt = root / "gt.png";
        script = root / "script.json";
        write_file(image, encode_gray_png(make_nested_image()));
        write_file(gt, encode_mask_png(nested_square_minus_circle_mask()));
        write_script(R"([
          {"round": 1, "shape": {"type": "rect", "x": 5, "y": 5, "width": 40, "height": 40}, "speed": 500},
          {"round": 2, "shape": {"type": "scribble", "points": [[25, 25]], "radius": 10}, "point": [24, 24], "speed": 20}
        ])");
    }
    ~Workspace() { fs::remove_all(root); }
    void write_script(const std::string& text) const { write_file(script, text); }
    RunManifest manifest(const std::string& out) const {
        RunManifest m;
        m.image = image;
        m.script = script;
        m.out = root / out;
        m.ground_truth = gt;
        m.param_overrides = {{"dt", 1e-4}};
        return m;
    }
};

std::string slurp(const fs::path& p) {
    const Bytes b = read_file(p);
    return std::string(b.begin(), b.end());
}

int run_binary(const std::string& args) {
    const int status = std::system((std::string(SILSM_BINARY) + " " + args + " >/dev/null 2>&1").c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

pid_t spawn_serve(const std::vector<std::string>& args) {
    const pid_t pid = fork();
    if (pid == 0) {
        std::vector<char*> argv{const_cast<char*>(SILSM_BINARY), const_cast<char*>("serve")};
        for (const auto& a : args) argv.push_back(const_cast<char*>(a.c_str()));
        argv.push_back(nullptr);
        if (!std::freopen("/dev/null", "w", stderr)) _exit(126);
        execv(SILSM_BINARY, argv.data());
        _exit(127);
    }
    return pid;
}

bool wait_healthy(int port) {
    httplib::Client c("127.0.0.1", port);
    c.set_connection_timeout(1, 0);
    c.set_read_timeout(1, 0);
    for (int i = 0; i < 100; ++i) {
        if (auto r = c.Get("/health"); r && r->status == 200) return true;
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
    }
    return false;
}

int free_port() {
    const int sock = socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    socklen_t len = sizeof(addr);
    int port = -1;
    if (bind(sock, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0 &&
        getsockname(sock, reinterpret_cast<sockaddr*>(&addr), &len) == 0)
        port = ntohs(addr.sin_port);
    close(sock);
    return port;
}

int wait_exit(pid_t pid) {
    int status = 0;
    waitpid(pid, &status, 0);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("segment writes every output") {
    Workspace ws;
    std::ostringstream err;
    REQUIRE(cmd_segment(ws.manifest("out"), err) == kExitOk);
    const fs::path out = ws.root / "out";
    for (const char* f : {"mask.png", "contours.json", "overlay.png", "diagnostics.jsonl", "phi.snap", "metrics.json",
                          "metrics.csv"})
        CHECK(fs::exists(out / f));
    const json metrics = json::parse(slurp(out / "metrics.json"));
    CHECK(metrics["dice"].get<double>() >= 0.95);
    CHECK(decode_mask(read_file(out / "mask.png")) == foreground_mask(decode_snapshot(read_file(out / "phi.snap"))));
    std::istringstream diag(slurp(out / "diagnostics.jsonl"));
    int lines = 0;
    for (std::string l; std::getline(diag, l);) {
        const json j = json::parse(l);
        CHECK(j.contains("round"));
        ++lines;
    }
    CHECK(lines == 400);
    const std::string csv = slurp(out / "metrics.csv");
    CHECK(csv.rfind("round,dice,jaccard,precision,recall", 0) == 0);
}

TEST_CASE("segment is deterministic") {
    Workspace ws;
    std::ostringstream err;
    REQUIRE(cmd_segment(ws.manifest("a"), err) == kExitOk);
    REQUIRE(cmd_segment(ws.manifest("b"), err) == kExitOk);
    for (const char* f : {"mask.png", "metrics.json", "contours.json", "phi.snap"})
        CHECK(slurp(ws.root / "a" / f) == slurp(ws.root / "b" / f));
}

TEST_CASE("segment exit codes") {
    Workspace ws;
    std::ostringstream err;
    SUBCASE("missing image") {
        RunManifest m = ws.manifest("o");
        m.image = ws.root / "nope.png";
        CHECK(cmd_segment(m, err) == kExitDecode);
        CHECK_FALSE(fs::exists(m.out));
    }
    SUBCASE("round out of order") {
        ws.write_script(R"([
          {"round": 1, "shape": {"type": "rect", "x": 5, "y": 5, "width": 40, "height": 40}, "speed": 500},
          {"round": 3, "shape": {"type": "rect", "x": 5, "y": 5, "width": 4, "height": 4}, "point": [6, 6], "speed": 1}
        ])");
        CHECK(cmd_segment(ws.manifest("o"), err) == kExitProtocol);
        CHECK_FALSE(fs::exists(ws.root / "o" / "mask.png"));
    }
    SUBCASE("malformed script") {
        ws.write_script("{");
        CHECK(cmd_segment(ws.manifest("o"), err) != kExitOk);
    }
    SUBCASE("divergence at the default time step") {
        RunManifest m = ws.manifest("o");
        m.param_overrides = json::object();
        CHECK(cmd_segment(m, err) == kExitDivergence);
        CHECK(err.str().find("diverg") != std::string::npos);
    }
    SUBCASE("bad parameter override") {
        RunManifest m = ws.manifest("o");
        m.param_overrides = {{"eps", 0.0}};
        CHECK(cmd_segment(m, err) == kExitUsage);
    }
    SUBCASE("ground truth of the wrong size") {
        write_file(ws.gt, encode_mask_png(RegionMask(10, 10, 1)));
        CHECK(cmd_segment(ws.manifest("o"), err) != kExitOk);
    }
}

TEST_CASE("validate") {
    std::ostringstream out, err;
    CHECK(cmd_validate("bogus", std::nullopt, out, err) == kExitUsage);
    CHECK(cmd_validate("energy", std::nullopt, out, err) == kExitOk);
    const json report = json::parse(out.str());
    CHECK(report.dump().find("A1.r0") != std::string::npos);
}

TEST_CASE("binary front door") {
    Workspace ws;
    CHECK(run_binary("--help") == 0);
    CHECK(run_binary("") == kExitUsage);
    CHECK(run_binary("frobnicate") == kExitUsage);
    CHECK(run_binary("validate bogus") == kExitUsage);
    CHECK(run_binary("validate metrics --out " + (ws.root / "r.json").string()) == kExitOk);
    CHECK(fs::exists(ws.root / "r.json"));
    CHECK(run_binary("segment --image " + ws.image.string() + " --script " + ws.script.string() + " --out " +
                     (ws.root / "cli").string() + " --dt 0.0001 --gt " + ws.gt.string()) == kExitOk);
    CHECK(fs::exists(ws.root / "cli" / "metrics.json"));
    CHECK(run_binary("segment --image " + ws.image.string() + " --script " + ws.script.string() + " --out " +
                     (ws.root / "cli2").string() + " --c1-scope sideways") == kExitUsage);
}

TEST_CASE("serve lifecycle") {
    Workspace ws;
    const int port = free_port();
    REQUIRE(port > 0);
    const std::string listen = "127.0.0.1:" + std::to_string(port);
    const std::string data = (ws.root / "data").string();
    const pid_t a = spawn_serve({"--listen", listen, "--data-dir", data});
    REQUIRE(wait_healthy(port));

    httplib::Client c("127.0.0.1", port);
    c.set_read_timeout(60, 0);
    const Bytes png = read_file(ws.image);
    auto created = c.Post("/sessions?params=%7B%22dt%22%3A0.0001%7D", std::string(png.begin(), png.end()), "image/png");
    REQUIRE(created);
    const std::string id = json::parse(created->body)["id"];
    auto r1 = c.Post("/sessions/" + id + "/interactions",
                     R"({"round":1,"shape":{"type":"rect","x":5,"y":5,"width":40,"height":40},"speed":500})",
                     "application/json");
    REQUIRE(r1);
    REQUIRE(r1->status == 200);
    const std::string checksum_before = json::parse(c.Get("/sessions/" + id)->body)["phi"]["checksum"];

    const pid_t clash = spawn_serve({"--listen", listen, "--data-dir", (ws.root / "other").string()});
    CHECK(wait_exit(clash) == kExitRuntime);

    kill(a, SIGTERM);
    CHECK(wait_exit(a) == 0);

    const pid_t b = spawn_serve({"--listen", listen, "--data-dir", data});
    REQUIRE(wait_healthy(port));
    auto doc = c.Get("/sessions/" + id);
    REQUIRE(doc);
    CHECK(doc->status == 200);
    const json j = json::parse(doc->body);
    CHECK(j["phi"]["checksum"] == checksum_before);
    CHECK(j["replay_verified"] == true);
    kill(b, SIGINT);
    CHECK(wait_exit(b) == 0);
}
