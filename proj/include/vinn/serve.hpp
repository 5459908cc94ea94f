#pragma once

// Closed-loop policy service over TCP. Per-connection handshake carries the
// protocol magic and version; after that each request/response is one
// length-prefixed frame (4-byte big-endian length, f32 LE numeric payloads).

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <thread>

#include "vinn/core.hpp"
#include "vinn/encoder.hpp"
#include "vinn/policy.hpp"

namespace vinn::serve {

constexpr char kMagic[4] = {'V', 'N', 'N', '1'};
constexpr std::uint16_t kProtocolVersion = 1;

// Request flag bits.
constexpr std::uint8_t kFlagClientSideScale = 0x01;  // skip server-side action scaling

enum class Status : std::uint8_t {
  Ok = 0,
  BadFrame = 1,
  DimMismatch = 2,
  Internal = 3,
};

struct TimeoutError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProtocolError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ServerConfig {
  std::string bind_host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
};

// Stateless request/response service: decode -> predict -> scale -> respond.
// The index, encoder, and policy config are immutable shared state; each
// connection is handled independently.
class PolicyServer {
 public:
  PolicyServer(policy::NeighborIndex index, std::unique_ptr<const encoder::Encoder> enc,
               policy::PolicyConfig policy_cfg, ServerConfig server_cfg = {});
  ~PolicyServer();

  PolicyServer(const PolicyServer&) = delete;
  PolicyServer& operator=(const PolicyServer&) = delete;

  void start();  // binds, listens, spawns the accept loop
  void stop();   // closes the listener and drains connections

  std::uint16_t port() const { return port_; }

 private:
  void accept_loop();
  void handle_connection(int fd);

  policy::NeighborIndex index_;
  std::unique_ptr<const encoder::Encoder> enc_;
  policy::PolicyConfig policy_cfg_;
  ServerConfig server_cfg_;

  std::atomic<bool> running_{false};
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::thread accept_thread_;
  std::mutex mu_;
  std::vector<std::thread> workers_;
  std::vector<int> client_fds_;
};

struct QueryResult {
  Status status = Status::Ok;
  core::Action action;
  double nearest_distance = 0.0;
};

// One round-trip against a running server. Throws TimeoutError when the
// server is unreachable or silent past the deadline, ProtocolError on a
// broken handshake or framing. Server-side failures come back as non-Ok
// statuses.
QueryResult client_query(const std::string& host, std::uint16_t port, std::span<const float> obs,
                         std::chrono::milliseconds timeout = std::chrono::milliseconds(1000),
                         bool client_side_scale = false);

}  // namespace vinn::serve
