#include <doctest.h>

#include <httplib.h>
#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <set>
#include <thread>

#include "silsm/image_io.hpp"
#include "silsm/session_service.hpp"
#include "silsm/validation.hpp"

using namespace silsm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int dir_counter = 0;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("silsm_service_" + std::to_string(::getpid()) + "_" + std::to_string(++dir_counter));
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ServiceConfig config_in(const fs::path& dir) {
    ServiceConfig c;
    c.data_dir = dir;
    c.defaults.dt = 1e-4;
    return c;
}

Bytes nested_png() { return encode_gray_png(make_nested_image()); }

const json round1 = json::parse(R"({"round":1,"shape":{"type":"rect","x":5,"y":5,"width":40,"height":40},"speed":500})");
const json round2 = json::parse(
    R"({"round":2,"shape":{"type":"scribble","points":[[25,25]],"radius":10},"point":[24,24],"speed":20})");

std::string phi_hex(const SessionStore& s, const std::string& id) { return checksum_hex(checksum(s.get(id)->state.phi)); }

// Runs an HTTP server on an ephemeral port for the lifetime of the object.
struct TestServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    explicit TestServer(SessionStore& store) {
        install_routes(server, store);
        port = server.bind_to_any_port("127.0.0.1");
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~TestServer() {
        server.stop();
        thread.join();
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(60, 0);
        return c;
    }
};

std::vector<json> ndjson(const std::string& body) {
    std::vector<json> out;
    std::istringstream in(body);
    for (std::string line; std::getline(in, line);)
        if (!line.empty()) out.push_back(json::parse(line));
    return out;
}

}  // namespace

TEST_CASE("session creation") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string id = store.create_session(nested_png(), json(), std::nullopt);
    const json doc = state_document(*store.get(id));
    CHECK(doc["status"] == "awaiting first interaction");
    CHECK(doc["mask"].is_null());
    CHECK(doc["rounds"] == 0);
    CHECK(fs::exists(dir.path / id / "image.grid"));
    CHECK(fs::exists(dir.path / id / "params.json"));

    CHECK_THROWS_AS(store.create_session(encode_gray_png(GrayImage(2, 2, 1.0)), json(), std::nullopt), ParameterError);
    CHECK_THROWS_AS(store.create_session(Bytes{1, 2, 3}, json(), std::nullopt), DecodeError);
    CHECK_THROWS_AS(store.create_session(nested_png(), json{{"dt", -1}}, std::nullopt), ParameterError);
    try {
        store.create_session(nested_png(), json(), encode_mask_png(RegionMask(40, 50, 1)));
        FAIL("expected mismatch");
    } catch (const ParameterError& e) {
        CHECK(std::string(e.what()).find("40x50") != std::string::npos);
        CHECK(std::string(e.what()).find("50x50") != std::string::npos);
    }
    CHECK(store.get(store.create_session(nested_png(), json{{"dt", 0.002}}, std::nullopt))->state.params.dt == 0.002);
    CHECK_THROWS_AS(store.get("abc"), NotFoundError);
}

TEST_CASE("rounds, metrics and errors through the store") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string id =
        store.create_session(nested_png(), json(), encode_mask_png(nested_square_minus_circle_mask()));
    CHECK_THROWS_AS(store.run_steps(id, 5, std::nullopt), ProtocolError);
    CHECK_THROWS_AS(store.post_interaction(id, round2), RoundOrderError);

    const json r1 = store.post_interaction(id, round1);
    CHECK(r1["round"] == 1);
    CHECK(r1["diagnostics"].size() == 200);
    CHECK(r1["contours"].size() >= 1);
    CHECK(r1["metrics"]["dice"].get<double>() < 0.95);
    CHECK_THROWS_AS(store.post_interaction(id, round1), RoundOrderError);
    const json r2 = store.post_interaction(id, round2);
    CHECK(r2["metrics"]["dice"].get<double>() >= 0.95);
    const json doc = state_document(*store.get(id));
    CHECK(doc["status"] == "segmented");
    CHECK(doc["metrics"]["dice"].get<double>() >= 0.95);
    CHECK(doc["metrics_trajectory"].size() == 2);
    CHECK(doc["history"].size() == 2);
    CHECK(doc["contours"].size() == 2);
    CHECK(doc["interested"]["area"] == 1600);
}

TEST_CASE("extra steps") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string a = store.create_session(nested_png(), json(), std::nullopt);
    const std::string b = store.create_session(nested_png(), json(), std::nullopt);
    store.post_interaction(a, round1);
    store.post_interaction(b, round1);

    const std::string before = phi_hex(store, a);
    CHECK(store.run_steps(a, 0, std::nullopt).empty());
    CHECK(phi_hex(store, a) == before);
    CHECK(store.get(a)->script.size() == 1);

    int seen = 0;
    CHECK(store.run_steps(a, 200, std::nullopt, [&](const StepDiagnostics&) { ++seen; }).size() == 200);
    CHECK(seen == 200);
    store.run_steps(a, 200, std::nullopt);
    store.run_steps(b, 400, std::nullopt);
    CHECK(store.get(a)->state.phi == store.get(b)->state.phi);

    const auto snap = store.get(a);
    CHECK_THROWS_AS(store.run_steps(a, 50, 10.0), DivergenceError);
    CHECK(store.get(a)->state.phi == snap->state.phi);
    CHECK(store.get(a)->script.size() == snap->script.size());
    CHECK_THROWS_AS(store.run_steps(a, -1, std::nullopt), ProtocolError);
}

TEST_CASE("a point where phi is exactly zero is ambiguous") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string id = store.create_session(nested_png(), json{{"lambda1", 0.0}, {"lambda2", 0.0}}, std::nullopt);
    json ev = round1;
    ev["steps"] = 0;
    store.post_interaction(id, ev);
    const auto s = store.get(id);
    // Find a pixel and a dt for which one explicit step lands exactly on zero.
    const SessionState& st = s->state;
    const ScalarGrid seg = segmentation_velocity(
        st.image, st.phi, compute_region_means(st.image, st.phi, st.interested, st.params.eps), st.params);
    const ScalarGrid mbe = mbe_velocity(st.phi, st.params);
    const ScalarGrid inter = interaction_velocity(st.phi, st.velocity);
    std::optional<Pixel> hit;
    double dt = 0.0;
    for (int y = 0; y < 50 && !hit; ++y)
        for (int x = 0; x < 50 && !hit; ++x) {
            const std::size_t i = static_cast<std::size_t>(y) * 50 + x;
            const double v = seg[i] + mbe[i] + inter[i];
            if (!(st.phi[i] * v < 0.0)) continue;
            const double cand = -st.phi[i] / v;
            if (cand < 0.1 && st.phi[i] + cand * v == 0.0) {
                hit = Pixel{x, y};
                dt = cand;
            }
        }
    REQUIRE(hit);
    store.run_steps(id, 1, dt);
    REQUIRE(store.get(id)->state.phi(hit->x, hit->y) == 0.0);

    json bad = round2;
    bad["point"] = {hit->x, hit->y};
    CHECK_THROWS_AS(store.post_interaction(id, bad), AmbiguityError);

    TestServer srv(store);
    auto cli = srv.client();
    const auto res = cli.Post("/sessions/" + id + "/interactions", bad.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 422);
    const json body = json::parse(res->body);
    CHECK(body["error"]["code"] == "ambiguous_point");
    CHECK(body["error"]["pixel"] == json::array({hit->x, hit->y}));
}

TEST_CASE("restart replays the script to the same field") {
    TempDir dir;
    ServiceConfig cfg = config_in(dir.path);
    cfg.snapshot_per_round = true;
    std::string id, hex;
    json doc_before;
    {
        SessionStore store(cfg);
        id = store.create_session(nested_png(), json(), encode_mask_png(nested_square_minus_circle_mask()));
        store.post_interaction(id, round1);
        store.run_steps(id, 20, 2e-4);
        store.post_interaction(id, round2);
        hex = phi_hex(store, id);
        doc_before = state_document(*store.get(id));
    }
    CHECK(fs::exists(dir.path / id / "round_1.snap"));
    CHECK(fs::exists(dir.path / id / "round_2.snap"));
    {
        SessionStore store(cfg);
        CHECK(store.load_all() == 1);
        CHECK(phi_hex(store, id) == hex);
        CHECK(store.get(id)->replay_verified);
        CHECK(checksum_hex(checksum(decode_snapshot(read_file(dir.path / id / "phi.snap")))) == hex);
        CHECK(state_document(*store.get(id)).dump() == doc_before.dump());
    }
    // A tampered checksum is detected on replay.
    const Bytes meta_bytes = read_file(dir.path / id / "meta.json");
    json meta = json::parse(meta_bytes.begin(), meta_bytes.end());
    meta["phi_checksum"] = "0000000000000000";
    write_file(dir.path / id / "meta.json", meta.dump());
    fs::create_directories(dir.path / "ffff");
    SessionStore store(cfg);
    CHECK(store.load_all() == 1);
    CHECK_FALSE(store.get(id)->replay_verified);
}

TEST_CASE("reads are idempotent") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string id = store.create_session(nested_png(), json(), std::nullopt);
    store.post_interaction(id, round1);
    const std::string a = state_document(*store.get(id)).dump();
    const std::string b = state_document(*store.get(id)).dump();
    CHECK(a == b);
    TestServer srv(store);
    auto cli = srv.client();
    const auto r1 = cli.Get("/sessions/" + id);
    const auto r2 = cli.Get("/sessions/" + id);
    REQUIRE(r1);
    REQUIRE(r2);
    CHECK(r1->body == r2->body);
    CHECK(r1->body == a);
}

TEST_CASE("mutations on one session serialize") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    const std::string id = store.create_session(nested_png(), json(), std::nullopt);
    store.post_interaction(id, round1);
    std::set<std::string> committed{phi_hex(store, id)};
    std::set<std::string> observed;
    std::atomic<bool> stop{false};
    std::thread reader([&] {
        while (!stop) observed.insert(phi_hex(store, id));
    });
    json long_round = round2;
    long_round["steps"] = 1500;
    std::thread a([&] { store.post_interaction(id, long_round); });
    std::thread b([&] { store.run_steps(id, 700, std::nullopt); });
    a.join();
    b.join();
    stop = true;
    reader.join();

    const auto final_snap = store.get(id);
    REQUIRE(final_snap->script.size() == 3);
    // Replay the committed order: every intermediate state the reader saw must be one of them.
    SessionState replay(make_nested_image(), final_snap->state.params);
    for (const auto& e : final_snap->script) {
        replay = apply_entry(replay, e);
        committed.insert(checksum_hex(checksum(replay.phi)));
    }
    CHECK(checksum(replay.phi) == checksum(final_snap->state.phi));
    for (const auto& h : observed) CHECK(committed.count(h) == 1);
}

TEST_CASE("HTTP API") {
    TempDir dir;
    SessionStore store(config_in(dir.path));
    TestServer srv(store);
    auto cli = srv.client();

    auto health = cli.Get("/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(json::parse(health->body)["status"] == "ok");

    const Bytes png = nested_png();
    const Bytes gt = encode_mask_png(nested_square_minus_circle_mask());
    httplib::MultipartFormDataItems items{{"image", std::string(png.begin(), png.end()), "nested.png", "image/png"},
                                          {"ground_truth", std::string(gt.begin(), gt.end()), "gt.png", "image/png"},
                                          {"params", R"({"dt":0.0001})", "", "application/json"}};
    auto created = cli.Post("/sessions", items);
    REQUIRE(created);
    CHECK(created->status == 201);
    const std::string id = json::parse(created->body)["id"];

    auto raw = cli.Post("/sessions?params=%7B%22mu%22%3A0.5%7D", std::string(png.begin(), png.end()), "image/png");
    REQUIRE(raw);
    CHECK(raw->status == 201);
    CHECK(store.get(json::parse(raw->body)["id"])->state.params.mu == 0.5);

    auto bad_image = cli.Post("/sessions", "garbage", "image/png");
    REQUIRE(bad_image);
    CHECK(bad_image->status == 400);
    CHECK(json::parse(bad_image->body)["error"]["code"] == "decode");

    auto early_mask = cli.Get("/sessions/" + id + "/mask.png");
    REQUIRE(early_mask);
    CHECK(early_mask->status == 409);
    auto early_steps = cli.Post("/sessions/" + id + "/steps", R"({"n":3})", "application/json");
    REQUIRE(early_steps);
    CHECK(early_steps->status == 422);

    auto r1 = cli.Post("/sessions/" + id + "/interactions", round1.dump(), "application/json");
    REQUIRE(r1);
    CHECK(r1->status == 200);
    CHECK(json::parse(r1->body)["round"] == 1);

    auto dup = cli.Post("/sessions/" + id + "/interactions", round1.dump(), "application/json");
    REQUIRE(dup);
    CHECK(dup->status == 409);
    CHECK(json::parse(dup->body)["error"]["code"] == "round_order");

    auto malformed = cli.Post("/sessions/" + id + "/interactions", R"({"round":2})", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 422);
    auto not_json = cli.Post("/sessions/" + id + "/interactions", "{", "application/json");
    REQUIRE(not_json);
    CHECK(not_json->status == 400);

    auto r2 = cli.Post("/sessions/" + id + "/interactions", round2.dump(), "application/json");
    REQUIRE(r2);
    CHECK(json::parse(r2->body)["metrics"]["dice"].get<double>() >= 0.95);

    auto steps = cli.Post("/sessions/" + id + "/steps", R"({"n":5})", "application/json");
    REQUIRE(steps);
    CHECK(steps->status == 200);
    CHECK(steps->get_header_value("Content-Type") == "application/x-ndjson");
    const auto records = ndjson(steps->body);
    REQUIRE(records.size() == 6);
    CHECK(records[0]["step"] == 1);
    CHECK(records[5]["done"] == true);
    CHECK(records[5]["phi_checksum"] == phi_hex(store, id));

    auto none = cli.Post("/sessions/" + id + "/steps", R"({"n":0})", "application/json");
    REQUIRE(none);
    CHECK(ndjson(none->body).empty());

    const std::string before = phi_hex(store, id);
    auto boom = cli.Post("/sessions/" + id + "/steps", R"({"n":50,"dt":10})", "application/json");
    REQUIRE(boom);
    const auto boom_records = ndjson(boom->body);
    REQUIRE_FALSE(boom_records.empty());
    CHECK(boom_records.back()["error"]["code"] == "divergence");
    CHECK(phi_hex(store, id) == before);
    auto after = cli.Get("/sessions/" + id);
    REQUIRE(after);
    CHECK(after->status == 200);

    auto mask = cli.Get("/sessions/" + id + "/mask.png");
    REQUIRE(mask);
    CHECK(mask->get_header_value("Content-Type") == "image/png");
    CHECK(decode_mask(Bytes(mask->body.begin(), mask->body.end())) == foreground_mask(store.get(id)->state.phi));
    auto interest = cli.Get("/sessions/" + id + "/interested.png");
    REQUIRE(interest);
    CHECK(area(decode_mask(Bytes(interest->body.begin(), interest->body.end()))) == 1600);
    auto contours = cli.Get("/sessions/" + id + "/contours");
    REQUIRE(contours);
    CHECK(json::parse(contours->body)["contours"].size() == 2);

    auto missing = cli.Get("/sessions/0123abcd");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["error"]["code"] == "not_found");
}

TEST_CASE("service configuration") {
    TempDir dir;
    fs::create_directories(dir.path);
    const fs::path file = dir.path / "cfg.json";
    write_file(file, std::string(R"({"listen":"0.0.0.0:9000","data_dir":"/tmp/x","params":{"mu":2}})"));
    std::map<std::string, std::string> env{{"SILSM_LISTEN", "127.0.0.1:9100"}, {"SILSM_DT", "0.001"},
                                           {"SILSM_STEPS", "50"}, {"SILSM_SNAPSHOT_PER_ROUND", "1"}};
    auto getenv_fn = [&](const char* k) -> const char* {
        const auto it = env.find(k);
        return it == env.end() ? nullptr : it->second.c_str();
    };
    const ServiceConfig c = load_service_config(file, getenv_fn);
    CHECK(c.host == "127.0.0.1");
    CHECK(c.port == 9100);
    CHECK(c.data_dir == "/tmp/x");
    CHECK(c.defaults.mu == 2.0);
    CHECK(c.defaults.dt == 0.001);
    CHECK(c.defaults.steps_per_round == 50);
    CHECK(c.snapshot_per_round);

    env = {{"SILSM_DT", "fast"}};
    CHECK_THROWS_AS(load_service_config(std::nullopt, getenv_fn), ParameterError);
    env = {{"SILSM_EPS", "-1"}};
    CHECK_THROWS_AS(load_service_config(std::nullopt, getenv_fn), ParameterError);
    env = {};
    const ServiceConfig d = load_service_config(std::nullopt, getenv_fn);
    CHECK(d.port == 8080);
    CHECK(d.defaults.dt == 0.1);
}
