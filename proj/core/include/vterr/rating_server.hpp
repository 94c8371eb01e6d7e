#pragma once
// HTTP+JSON front end for rating sessions.
//
//   POST /sessions                  {manifest, raters, adjudicator?, seed?, methods?, blinded?, session_id?}
//   GET  /sessions/{id}/items?rater=
//   GET  /items/{id}/image          PNG composite
//   POST /ratings                   {item_id, rater_id, score, timestamp?}
//   GET  /sessions/{id}/consensus
//   POST /consensus                 {item_id, adjudicator, score, timestamp?}
//   GET  /sessions/{id}/results     409 with the unfinalized items until complete
//   GET  /items/{id}/audit
//
// Errors are {"schema_version", "error"} with 400 (bad request), 404 (unknown
// session, item or rater) or 409 (state conflict).

#include <filesystem>
#include <memory>
#include <string>

#include "vterr/rating.hpp"

namespace vterr::rating {

struct ServerOptions {
  /// Session logs live here as <session_id>.jsonl and are replayed on start.
  std::filesystem::path data_dir;
  std::string host = "127.0.0.1";
  /// 0 picks a free port.
  int port = 0;
};

class RatingServer {
public:
  explicit RatingServer(ServerOptions opt);
  ~RatingServer();
  RatingServer(const RatingServer &) = delete;
  RatingServer &operator=(const RatingServer &) = delete;

  /// Binds the socket and returns the port.
  int bind();
  /// Serves until stop(); binds first if needed.
  void listen();
  /// Binds and serves on a background thread; returns the port.
  int start();
  void stop();
  [[nodiscard]] int port() const;
  [[nodiscard]] std::size_t session_count() const;

  /// Direct access for embedding and tests; nullptr when unknown.
  [[nodiscard]] Session *session(const std::string &id);

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace vterr::rating
