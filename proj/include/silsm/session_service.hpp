#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "json.hpp"

#include "silsm/image_io.hpp"
#include "silsm/interaction.hpp"
#include "silsm/metrics.hpp"

namespace httplib {
class Server;
}

namespace silsm {

class NotFoundError : public Error {
public:
    using Error::Error;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::filesystem::path data_dir = "silsm-data";
    SolverParams defaults;
    bool snapshot_per_round = false;
};

/// Reads an optional JSON config file, then applies SILSM_* environment overrides.
ServiceConfig load_service_config(const std::optional<std::filesystem::path>& file,
                                  const std::function<const char*(const char*)>& getenv_fn = {});

/// Immutable view of a session at a committed boundary.
struct SessionSnapshot {
    std::string id;
    SessionState state;
    std::vector<ScriptEntry> script;
    std::optional<RegionMask> ground_truth;
    nlohmann::json metrics_trajectory = nlohmann::json::array();
    std::string created;
    std::string updated;
    bool replay_verified = true;
};

/**
 * @brief Session registry with one directory per session.
 *
 * Mutations on one session are serialised; readers get a shared pointer to
 * the last committed snapshot and never observe a partially evolved field.
 */
class SessionStore {
public:
    explicit SessionStore(ServiceConfig config);

    /// Replays every persisted session found in the data directory. Returns the number loaded.
    std::size_t load_all();

    std::string create_session(const Bytes& image, const nlohmann::json& params,
                               const std::optional<Bytes>& ground_truth);

    nlohmann::json post_interaction(const std::string& id, const nlohmann::json& event);

    /// Runs n steps, reporting each step; on divergence the committed state is left untouched and the error rethrown.
    std::vector<StepDiagnostics> run_steps(const std::string& id, int n, std::optional<double> dt,
                                           const ProgressFn& progress = {});

    std::shared_ptr<const SessionSnapshot> get(const std::string& id) const;
    std::vector<std::string> ids() const;

    /// Rewrites the phi snapshot of every session.
    void flush();

    const ServiceConfig& config() const { return config_; }

private:
    struct Entry {
        std::mutex op_mutex;
        mutable std::mutex view_mutex;
        std::shared_ptr<const SessionSnapshot> view;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;
    void commit(Entry& e, std::shared_ptr<const SessionSnapshot> snap);
    void persist(const SessionSnapshot& s, bool full) const;
    std::filesystem::path dir_of(const std::string& id) const;

    ServiceConfig config_;
    mutable std::shared_mutex map_mutex_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
};

nlohmann::json state_document(const SessionSnapshot& s);
nlohmann::json phi_statistics(const LevelSetField& phi);

/// Registers all routes on server.
void install_routes(httplib::Server& server, SessionStore& store);

}  // namespace silsm
