#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "oxgen/genclient.hpp"

namespace oxgen {

/// Local HTTP API for the curation loop:
///   GET  /api/pending?offset=&limit=   page of pending records
///   GET  /api/image/{id}               stored PNG bytes
///   POST /api/decision                 {image_id, decision, reason[, reviewer]}
///   GET  /api/summary                  selection report and reason taxonomy
/// Static UI assets are served from `static_dir` when given.
class TriageServer {
 public:
  TriageServer(CurationLedger& ledger, std::optional<std::filesystem::path> static_dir = {});
  ~TriageServer();
  TriageServer(const TriageServer&) = delete;
  TriageServer& operator=(const TriageServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks a free
  /// port. Throws InputError when the address cannot be bound.
  void start(const std::string& host, int port);
  int port() const;
  void stop();
  /// Blocks until stop() is called from another thread or a signal.
  void wait();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline constexpr int kDefaultPageSize = 50;

}  // namespace oxgen
