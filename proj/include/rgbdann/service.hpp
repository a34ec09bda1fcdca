#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rgbdann/error.hpp"
#include "rgbdann/session.hpp"

namespace rgbdann {

struct ServiceConfig {
  std::filesystem::path data_dir;     // one subdirectory per frame id
  std::filesystem::path results_dir;  // finished annotations and action logs; empty = data_dir/annotations
  SessionConfig session;
};

/// JSON views shared by the service and the CLI.
nlohmann::json session_state(const Session& s);
nlohmann::json node_state(const Session& s, const SGNode& n);
/// Convex hull of the projected corners plus the 12 projected box edges (corners behind the camera dropped).
nlohmann::json projected_cuboid(const Cuboid& c, const Intrinsics& k);

/// HTTP status for a library error code.
int http_status(Errc code);

class AnnotationService {
 public:
  AnnotationService(ServiceConfig config, std::shared_ptr<const PriorModel> model);

  // Each call mirrors one endpoint; failures are thrown as Error.
  nlohmann::json create_session(const nlohmann::json& body);                     // POST /sessions
  nlohmann::json session(const std::string& id) const;                           // GET /sessions/{id}
  nlohmann::json act(const std::string& id, const nlohmann::json& body);         // POST /sessions/{id}/actions
  nlohmann::json retrain(const nlohmann::json& body);                            // POST /retrain
  nlohmann::json metrics() const;                                                // GET /metrics
  std::vector<unsigned char> frame_color(const std::string& frame_id) const;     // GET /frames/{id}/color
  nlohmann::json frame_overlay(const std::string& frame_id,                      // GET /frames/{id}/overlay
                               const std::optional<std::string>& session_id) const;

  std::shared_ptr<const PriorModel> snapshot() const;
  const ServiceConfig& config() const { return config_; }

  /// Blocks serving HTTP on host:port. port 0 picks a free port, reported through `bound`.
  void serve(const std::string& host, int port, std::atomic<int>* bound = nullptr);
  void stop();

 private:
  struct Slot {
    mutable std::mutex mutex;  // one in-flight action per session; others wait their turn
    Session session;
    bool trained = false;
    std::optional<AnnotationRecord> truth;
  };

  std::shared_ptr<Slot> slot(const std::string& id) const;
  RgbdFrame load(const std::string& frame_id) const;
  void persist(const Session& s) const;

  ServiceConfig config_;
  mutable std::mutex mutex_;  // guards sessions_, model_, next_id_
  std::map<std::string, std::shared_ptr<Slot>> sessions_;
  std::shared_ptr<const PriorModel> model_;
  std::size_t next_id_ = 1;
  std::shared_ptr<void> server_;
};

}  // namespace rgbdann
