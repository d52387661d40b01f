#include "silsm/session_service.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <iostream>
#include <random>

#include "silsm/contour.hpp"

namespace silsm {

namespace fs = std::filesystem;

namespace {

std::string now_iso8601() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string new_session_id() {
    std::random_device rd;
    std::uniform_int_distribution<std::uint64_t> dist;
    std::mt19937_64 gen((static_cast<std::uint64_t>(rd()) << 32) ^ rd());
    return checksum_hex(dist(gen)) + checksum_hex(dist(gen));
}

bool valid_id(const std::string& id) {
    return !id.empty() && id.size() <= 64 &&
           std::all_of(id.begin(), id.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
}

nlohmann::json read_json_file(const fs::path& p) {
    const Bytes b = read_file(p);
    try {
        return nlohmann::json::parse(b.begin(), b.end());
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError("bad JSON in '" + p.string() + "': " + e.what());
    }
}

void append_metrics(SessionSnapshot& s, std::size_t entry_index) {
    if (!s.ground_truth || !s.state.started()) return;
    const MetricReport m = evaluate(foreground_mask(s.state.phi), *s.ground_truth);
    nlohmann::json j = to_json(m);
    j["entry"] = entry_index;
    j["round"] = s.state.history.size();
    s.metrics_trajectory.push_back(std::move(j));
}

}  // namespace

// ============================================================================
// Config
// ============================================================================

ServiceConfig load_service_config(const std::optional<fs::path>& file,
                                  const std::function<const char*(const char*)>& getenv_fn) {
    ServiceConfig c;
    if (file) {
        const nlohmann::json j = read_json_file(*file);
        try {
            if (j.contains("listen")) {
                const auto s = j["listen"].get<std::string>();
                const auto colon = s.rfind(':');
                if (colon == std::string::npos) throw ParameterError("listen must be host:port");
                c.host = s.substr(0, colon);
                c.port = std::stoi(s.substr(colon + 1));
            }
            if (j.contains("data_dir")) c.data_dir = j["data_dir"].get<std::string>();
            if (j.contains("snapshot_per_round")) c.snapshot_per_round = j["snapshot_per_round"].get<bool>();
            if (j.contains("params")) from_json(j["params"], c.defaults);
        } catch (const nlohmann::json::exception& e) {
            throw ParameterError(std::string("bad service config: ") + e.what());
        } catch (const std::invalid_argument&) {
            throw ParameterError("bad port in service config");
        }
    }
    auto env = [&](const char* name) -> const char* { return getenv_fn ? getenv_fn(name) : std::getenv(name); };
    auto num = [](const char* name, const char* v) {
        try {
            std::size_t used = 0;
            const double d = std::stod(v, &used);
            if (used != std::string(v).size()) throw std::invalid_argument(name);
            return d;
        } catch (const std::exception&) {
            throw ParameterError(std::string(name) + " is not a number: '" + v + "'");
        }
    };
    if (const char* v = env("SILSM_LISTEN")) {
        const std::string s = v;
        const auto colon = s.rfind(':');
        if (colon == std::string::npos) throw ParameterError("SILSM_LISTEN must be host:port");
        c.host = s.substr(0, colon);
        c.port = static_cast<int>(num("SILSM_LISTEN port", s.substr(colon + 1).c_str()));
    }
    if (const char* v = env("SILSM_DATA_DIR")) c.data_dir = v;
    if (const char* v = env("SILSM_SNAPSHOT_PER_ROUND")) c.snapshot_per_round = std::string(v) == "1" ||
                                                                               std::string(v) == "true";
    if (const char* v = env("SILSM_DT")) c.defaults.dt = num("SILSM_DT", v);
    if (const char* v = env("SILSM_STEPS")) c.defaults.steps_per_round = static_cast<int>(num("SILSM_STEPS", v));
    if (const char* v = env("SILSM_MU")) c.defaults.mu = num("SILSM_MU", v);
    if (const char* v = env("SILSM_ALPHA")) c.defaults.alpha = num("SILSM_ALPHA", v);
    if (const char* v = env("SILSM_LAMBDA1")) c.defaults.lambda1 = num("SILSM_LAMBDA1", v);
    if (const char* v = env("SILSM_LAMBDA2")) c.defaults.lambda2 = num("SILSM_LAMBDA2", v);
    if (const char* v = env("SILSM_EPS")) c.defaults.eps = num("SILSM_EPS", v);
    c.defaults.validate();
    if (c.port < 0 || c.port > 65535) throw ParameterError("port out of range");
    return c;
}

// ============================================================================
// SessionStore
// ============================================================================

SessionStore::SessionStore(ServiceConfig config) : config_(std::move(config)) {
    fs::create_directories(config_.data_dir);
}

fs::path SessionStore::dir_of(const std::string& id) const { return config_.data_dir / id; }

std::shared_ptr<SessionStore::Entry> SessionStore::find(const std::string& id) const {
    std::shared_lock lock(map_mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
    return it->second;
}

std::shared_ptr<const SessionSnapshot> SessionStore::get(const std::string& id) const {
    auto e = find(id);
    std::lock_guard lock(e->view_mutex);
    return e->view;
}

std::vector<std::string> SessionStore::ids() const {
    std::shared_lock lock(map_mutex_);
    std::vector<std::string> out;
    for (const auto& [id, _] : sessions_) out.push_back(id);
    return out;
}

void SessionStore::commit(Entry& e, std::shared_ptr<const SessionSnapshot> snap) {
    persist(*snap, false);
    std::lock_guard lock(e.view_mutex);
    e.view = std::move(snap);
}

void SessionStore::persist(const SessionSnapshot& s, bool full) const {
    const fs::path dir = dir_of(s.id);
    fs::create_directories(dir);
    if (full) {
        write_file(dir / "image.grid", encode_snapshot(s.state.image));
        write_file(dir / "params.json", nlohmann::json(s.state.params).dump(2));
        if (s.ground_truth) write_file(dir / "ground_truth.png", encode_mask_png(*s.ground_truth));
    }
    write_file(dir / "script.json", script_to_json(s.script).dump(2));
    nlohmann::json meta{{"id", s.id},
                        {"created", s.created},
                        {"updated", s.updated},
                        {"rounds", s.state.history.size()},
                        {"entries", s.script.size()}};
    if (s.state.started()) {
        meta["phi_checksum"] = checksum_hex(checksum(s.state.phi));
        write_file(dir / "phi.snap", encode_snapshot(s.state.phi));
        if (config_.snapshot_per_round && !s.script.empty() &&
            std::holds_alternative<InteractionEvent>(s.script.back())) {
            write_file(dir / ("round_" + std::to_string(s.state.history.size()) + ".snap"),
                       encode_snapshot(s.state.phi));
        }
    }
    write_file(dir / "meta.json", meta.dump(2));
}

std::string SessionStore::create_session(const Bytes& image, const nlohmann::json& params,
                                         const std::optional<Bytes>& ground_truth) {
    GrayImage img = decode_image(image);
    SolverParams p = config_.defaults;
    if (!params.is_null()) from_json(params, p);
    auto snap = std::make_shared<SessionSnapshot>(SessionSnapshot{{}, SessionState(std::move(img), p), {}, {}, {}, {}, {}, true});
    if (ground_truth) {
        RegionMask gt = decode_mask(*ground_truth);
        const auto& im = snap->state.image;
        if (!gt.same_shape(im)) {
            throw ParameterError("ground truth is " + std::to_string(gt.width()) + "x" + std::to_string(gt.height()) +
                                 " but image is " + std::to_string(im.width()) + "x" + std::to_string(im.height()));
        }
        if (area(gt) == 0) throw ParameterError("ground truth mask is empty");
        snap->ground_truth = std::move(gt);
    }
    snap->created = snap->updated = now_iso8601();
    auto entry = std::make_shared<Entry>();
    std::unique_lock lock(map_mutex_);
    do {
        snap->id = new_session_id();
    } while (sessions_.count(snap->id));
    persist(*snap, true);
    const std::string id = snap->id;
    entry->view = std::move(snap);
    sessions_[id] = entry;
    return id;
}

nlohmann::json SessionStore::post_interaction(const std::string& id, const nlohmann::json& event_json) {
    auto e = find(id);
    const InteractionEvent event = event_from_json(event_json);
    std::lock_guard op(e->op_mutex);
    std::shared_ptr<const SessionSnapshot> cur;
    {
        std::lock_guard lock(e->view_mutex);
        cur = e->view;
    }
    auto next = std::make_shared<SessionSnapshot>(*cur);
    next->state = apply_interaction(next->state, event);
    next->script.push_back(event);
    next->updated = now_iso8601();
    append_metrics(*next, next->script.size() - 1);
    commit(*e, next);

    const RoundRecord& rec = next->state.history.back();
    const RegionMask fg = foreground_mask(next->state.phi);
    nlohmann::json diags = nlohmann::json::array();
    for (const auto& d : rec.diagnostics) diags.push_back(to_json(d));
    nlohmann::json out{{"round", rec.event.round},
                       {"summary", round_summary_json(rec)},
                       {"mask", {{"area", area(fg)}, {"checksum", checksum_hex(checksum(fg))}}},
                       {"contours", contours_to_json(extract_contours(next->state.phi))},
                       {"diagnostics", diags}};
    if (next->ground_truth) out["metrics"] = next->metrics_trajectory.back();
    return out;
}

std::vector<StepDiagnostics> SessionStore::run_steps(const std::string& id, int n, std::optional<double> dt,
                                                     const ProgressFn& progress) {
    auto e = find(id);
    std::lock_guard op(e->op_mutex);
    std::shared_ptr<const SessionSnapshot> cur;
    {
        std::lock_guard lock(e->view_mutex);
        cur = e->view;
    }
    const StepsRequest req{n, dt};
    if (!cur->state.started()) throw ProtocolError("no round applied yet; submit round 1 first");
    if (n == 0) return {};
    auto next = std::make_shared<SessionSnapshot>(*cur);
    std::vector<StepDiagnostics> diags;
    next->state = run_more_steps(next->state, req, progress, &diags);
    next->script.push_back(req);
    next->updated = now_iso8601();
    append_metrics(*next, next->script.size() - 1);
    commit(*e, next);
    return diags;
}

void SessionStore::flush() {
    for (const auto& id : ids()) persist(*get(id), false);
}

std::size_t SessionStore::load_all() {
    std::size_t loaded = 0;
    if (!fs::exists(config_.data_dir)) return 0;
    for (const auto& dirent : fs::directory_iterator(config_.data_dir)) {
        if (!dirent.is_directory()) continue;
        const std::string id = dirent.path().filename().string();
        if (!valid_id(id)) continue;
        try {
            const fs::path dir = dirent.path();
            GrayImage img = decode_snapshot(read_file(dir / "image.grid"));
            SolverParams p;
            from_json(read_json_file(dir / "params.json"), p);
            const nlohmann::json meta = read_json_file(dir / "meta.json");
            auto snap = std::make_shared<SessionSnapshot>(
                SessionSnapshot{id, SessionState(std::move(img), p), {}, {}, {}, {}, {}, true});
            snap->created = meta.value("created", std::string());
            snap->updated = meta.value("updated", std::string());
            if (fs::exists(dir / "ground_truth.png")) snap->ground_truth = read_mask(dir / "ground_truth.png");
            snap->script = script_from_json(read_json_file(dir / "script.json"));
            for (std::size_t i = 0; i < snap->script.size(); ++i) {
                snap->state = apply_entry(std::move(snap->state), snap->script[i]);
                append_metrics(*snap, i);
            }
            if (snap->state.started()) {
                const std::string replayed = checksum_hex(checksum(snap->state.phi));
                snap->replay_verified = meta.value("phi_checksum", std::string()) == replayed;
                if (!snap->replay_verified)
                    std::clog << "silsm: session " << id << ": replayed phi checksum " << replayed
                              << " differs from stored " << meta.value("phi_checksum", std::string()) << "\n";
            }
            auto entry = std::make_shared<Entry>();
            entry->view = std::move(snap);
            std::unique_lock lock(map_mutex_);
            sessions_[id] = std::move(entry);
            ++loaded;
        } catch (const std::exception& ex) {
            std::clog << "silsm: skipping session " << id << ": " << ex.what() << "\n";
        }
    }
    return loaded;
}

// ============================================================================
// Documents
// ============================================================================

nlohmann::json phi_statistics(const LevelSetField& phi) {
    double mn = phi[0], mx = phi[0], sum = 0.0;
    for (double v : phi.data()) {
        mn = std::min(mn, v);
        mx = std::max(mx, v);
        sum += v;
    }
    return {{"min", mn},
            {"max", mx},
            {"mean", sum / static_cast<double>(phi.size())},
            {"drift", std::isfinite(signed_distance_drift(phi)) ? nlohmann::json(signed_distance_drift(phi))
                                                                : nlohmann::json(nullptr)},
            {"checksum", checksum_hex(checksum(phi))}};
}

nlohmann::json state_document(const SessionSnapshot& s) {
    nlohmann::json history = nlohmann::json::array();
    for (const auto& r : s.state.history) history.push_back(round_summary_json(r));
    nlohmann::json doc{{"id", s.id},
                       {"width", s.state.image.width()},
                       {"height", s.state.image.height()},
                       {"params", s.state.params},
                       {"created", s.created},
                       {"updated", s.updated},
                       {"rounds", s.state.history.size()},
                       {"script", script_to_json(s.script)},
                       {"history", history},
                       {"has_ground_truth", s.ground_truth.has_value()},
                       {"metrics_trajectory", s.metrics_trajectory},
                       {"replay_verified", s.replay_verified}};
    if (!s.state.started()) {
        doc["status"] = "awaiting first interaction";
        doc["mask"] = nullptr;
        return doc;
    }
    const RegionMask fg = foreground_mask(s.state.phi);
    doc["status"] = "segmented";
    doc["mask"] = {{"area", area(fg)},
                   {"checksum", checksum_hex(checksum(fg))},
                   {"url", "/sessions/" + s.id + "/mask.png"}};
    doc["interested"] = {{"area", area(s.state.interested)},
                         {"checksum", checksum_hex(checksum(s.state.interested))},
                         {"url", "/sessions/" + s.id + "/interested.png"}};
    doc["phi"] = phi_statistics(s.state.phi);
    doc["contours"] = contours_to_json(extract_contours(s.state.phi));
    if (!s.metrics_trajectory.empty()) doc["metrics"] = s.metrics_trajectory.back();
    return doc;
}

// ============================================================================
// HTTP
// ============================================================================

namespace {

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                const nlohmann::json& extra = nullptr) {
    nlohmann::json body{{"error", {{"code", code}, {"message", message}}}};
    if (!extra.is_null()) body["error"].update(extra);
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

template <typename F>
void guarded(httplib::Response& res, F&& f) {
    try {
        f();
    } catch (const NotFoundError& e) {
        send_error(res, 404, "not_found", e.what());
    } catch (const RoundOrderError& e) {
        send_error(res, 409, "round_order", e.what());
    } catch (const AmbiguityError& e) {
        send_error(res, 422, "ambiguous_point", e.what(), {{"pixel", {e.x(), e.y()}}});
    } catch (const ProtocolError& e) {
        send_error(res, 422, "protocol", e.what());
    } catch (const ParameterError& e) {
        send_error(res, 422, "invalid_parameter", e.what());
    } catch (const DivergenceError& e) {
        send_error(res, 422, "divergence", e.what(), {{"step", e.step()}});
    } catch (const DecodeError& e) {
        send_error(res, 400, "decode", e.what());
    } catch (const nlohmann::json::exception& e) {
        send_error(res, 400, "bad_json", e.what());
    } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
    }
}

nlohmann::json parse_body(const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    try {
        return nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception& e) {
        throw DecodeError(std::string("request body is not JSON: ") + e.what());
    }
}

}  // namespace

void install_routes(httplib::Server& server, SessionStore& store) {
    server.Get("/health", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"status":"ok"})", "application/json");
    });

    // multipart/form-data with parts image, params (JSON) and ground_truth,
    // or a raw image body with params in the "params" query parameter.
    server.Post("/sessions", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            Bytes image;
            std::optional<Bytes> gt;
            nlohmann::json params;
            if (req.is_multipart_form_data()) {
                if (!req.has_file("image")) throw DecodeError("multipart request lacks an 'image' part");
                const auto& f = req.get_file_value("image");
                image.assign(f.content.begin(), f.content.end());
                if (req.has_file("ground_truth")) {
                    const auto& g = req.get_file_value("ground_truth");
                    gt = Bytes(g.content.begin(), g.content.end());
                }
                if (req.has_file("params")) {
                    const auto& p = req.get_file_value("params").content;
                    if (!p.empty()) params = nlohmann::json::parse(p);
                }
            } else {
                image.assign(req.body.begin(), req.body.end());
                if (req.has_param("params")) params = nlohmann::json::parse(req.get_param_value("params"));
            }
            const std::string id = store.create_session(image, params, gt);
            res.status = 201;
            res.set_content(nlohmann::json{{"id", id}, {"status", "awaiting first interaction"}}.dump(),
                            "application/json");
        });
    });

    server.Post(R"(/sessions/([0-9a-f]+)/interactions)", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const auto out = store.post_interaction(req.matches[1], parse_body(req));
            res.set_content(out.dump(), "application/json");
        });
    });

    server.Post(R"(/sessions/([0-9a-f]+)/steps)", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            const std::string id = req.matches[1];
            const nlohmann::json body = parse_body(req);
            int n = 0;
            std::optional<double> dt;
            try {
                n = body.value("n", 0);
                if (body.contains("dt") && !body["dt"].is_null()) dt = body["dt"].get<double>();
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError(std::string("bad steps request: ") + e.what());
            }
            if (n < 0) throw ProtocolError("n must be >= 0");
            if (dt && !(*dt > 0.0)) throw ParameterError("dt must be > 0");
            auto snap = store.get(id);
            if (!snap->state.started()) throw ProtocolError("no round applied yet; submit round 1 first");
            res.set_chunked_content_provider(
                "application/x-ndjson", [&store, id, n, dt](std::size_t, httplib::DataSink& sink) {
                    auto write = [&sink](const nlohmann::json& j) {
                        const std::string line = j.dump() + "\n";
                        sink.write(line.data(), line.size());
                    };
                    try {
                        store.run_steps(id, n, dt, [&](const StepDiagnostics& d) { write(to_json(d)); });
                        if (n > 0) {
                            auto s = store.get(id);
                            write({{"done", true}, {"phi_checksum", checksum_hex(checksum(s->state.phi))}});
                        }
                    } catch (const DivergenceError& e) {
                        write({{"error", {{"code", "divergence"}, {"message", e.what()}, {"step", e.step()}}}});
                    } catch (const std::exception& e) {
                        write({{"error", {{"code", "internal"}, {"message", e.what()}}}});
                    }
                    sink.done();
                    return true;
                });
        });
    });

    server.Get(R"(/sessions/([0-9a-f]+))", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] { res.set_content(state_document(*store.get(req.matches[1])).dump(), "application/json"); });
    });

    auto mask_route = [&store](bool interested) {
        return [&store, interested](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                auto s = store.get(req.matches[1]);
                if (!s->state.started()) {
                    send_error(res, 409, "not_started", "no round applied yet");
                    return;
                }
                const Bytes png =
                    encode_mask_png(interested ? s->state.interested : foreground_mask(s->state.phi));
                res.set_content(std::string(png.begin(), png.end()), "image/png");
            });
        };
    };
    server.Get(R"(/sessions/([0-9a-f]+)/mask.png)", mask_route(false));
    server.Get(R"(/sessions/([0-9a-f]+)/interested.png)", mask_route(true));

    server.Get(R"(/sessions/([0-9a-f]+)/contours)", [&store](const httplib::Request& req, httplib::Response& res) {
        guarded(res, [&] {
            auto s = store.get(req.matches[1]);
            nlohmann::json out{{"id", s->id}};
            out["contours"] = s->state.started() ? contours_to_json(extract_contours(s->state.phi))
                                                 : nlohmann::json::array();
            res.set_content(out.dump(), "application/json");
        });
    });
}

}  // namespace silsm
