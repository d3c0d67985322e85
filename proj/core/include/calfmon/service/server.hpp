#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>

namespace calfmon::service {

struct ServerConfig {
  std::filesystem::path data_dir = "calfmon-data";
  /// Directory of *.cwml artifacts; model1.cwml and model2.cwml are the
  /// defaults for prediction jobs.
  std::filesystem::path models_dir = "models";
  /// Dashboard bundle served at /, if it exists.
  std::filesystem::path static_dir;
  std::size_t workers = 0;  // 0: one per hardware thread
  int utc_offset_min = 0;
  std::size_t max_upload_bytes = std::size_t{2} << 30;
};

/// HTTP front of the store and job pool; routes live under /api/v1.
class Server {
 public:
  explicit Server(ServerConfig cfg);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and returns the port (an ephemeral one when `port` is 0).
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  void listen();
  void stop();
  /// Blocks until every submitted job has finished.
  void wait_for_jobs();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace calfmon::service
