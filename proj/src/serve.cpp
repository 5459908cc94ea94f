#include "vinn/serve.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <cstring>

namespace vinn::serve {

namespace {

constexpr std::size_t kHandshakeSize = 6;  // magic + u16 version
constexpr std::size_t kMaxFrame = 1 << 20;

// Request payload: flags u8, obs_dim u32 LE, obs f32 LE x obs_dim.
constexpr std::size_t kRequestHeader = 5;
// Response payload: status u8, translation 3 x f32, gripper u8, distance f32.
constexpr std::size_t kResponseSize = 1 + 12 + 1 + 4;

void put_f32_le(std::uint8_t* p, float v) {
  const std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff);
}

float get_f32_le(const std::uint8_t* p) {
  const std::uint32_t bits = std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) |
                             (std::uint32_t(p[2]) << 16) | (std::uint32_t(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

std::uint32_t get_u32_le(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
         (std::uint32_t(p[3]) << 24);
}

// Reads exactly n bytes. Returns false on orderly shutdown before the first
// byte; throws on errors mid-message.
bool read_exact(int fd, std::uint8_t* buf, std::size_t n, bool eof_ok) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, buf + got, n - got, 0);
    if (r == 0) {
      if (eof_ok && got == 0) return false;
      throw ProtocolError("connection closed mid-message");
    }
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("read timed out");
      throw ProtocolError(std::string("recv failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

void write_exact(int fd, const std::uint8_t* buf, std::size_t n) {
  std::size_t sent = 0;
  while (sent < n) {
    const ssize_t r = ::send(fd, buf + sent, n - sent, MSG_NOSIGNAL);
    if (r < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) throw TimeoutError("write timed out");
      throw ProtocolError(std::string("send failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(r);
  }
}

void write_frame(int fd, const std::vector<std::uint8_t>& payload) {
  std::uint8_t prefix[4];
  const auto len = static_cast<std::uint32_t>(payload.size());
  prefix[0] = static_cast<std::uint8_t>((len >> 24) & 0xff);
  prefix[1] = static_cast<std::uint8_t>((len >> 16) & 0xff);
  prefix[2] = static_cast<std::uint8_t>((len >> 8) & 0xff);
  prefix[3] = static_cast<std::uint8_t>(len & 0xff);
  write_exact(fd, prefix, 4);
  if (!payload.empty()) write_exact(fd, payload.data(), payload.size());
}

// Reads one length-prefixed frame; empty optional on orderly shutdown.
bool read_frame(int fd, std::vector<std::uint8_t>& payload, bool eof_ok) {
  std::uint8_t prefix[4];
  if (!read_exact(fd, prefix, 4, eof_ok)) return false;
  const std::uint32_t len = (std::uint32_t(prefix[0]) << 24) | (std::uint32_t(prefix[1]) << 16) |
                            (std::uint32_t(prefix[2]) << 8) | std::uint32_t(prefix[3]);
  if (len > kMaxFrame) throw ProtocolError("frame length " + std::to_string(len) + " too large");
  payload.resize(len);
  if (len > 0) read_exact(fd, payload.data(), len, false);
  return true;
}

std::vector<std::uint8_t> make_response(Status status, const core::Action& action,
                                        double distance) {
  std::vector<std::uint8_t> out(kResponseSize, 0);
  out[0] = static_cast<std::uint8_t>(status);
  for (int c = 0; c < 3; ++c) put_f32_le(out.data() + 1 + 4 * c, action.translation[c]);
  out[13] = static_cast<std::uint8_t>(core::gripper_code(action.gripper));
  put_f32_le(out.data() + 14, static_cast<float>(distance));
  return out;
}

void close_fd(int& fd) {
  if (fd >= 0) {
    ::close(fd);
    fd = -1;
  }
}

}  // namespace

PolicyServer::PolicyServer(policy::NeighborIndex index,
                           std::unique_ptr<const encoder::Encoder> enc,
                           policy::PolicyConfig policy_cfg, ServerConfig server_cfg)
    : index_(std::move(index)),
      enc_(std::move(enc)),
      policy_cfg_(policy_cfg),
      server_cfg_(std::move(server_cfg)) {
  if (!enc_) throw std::invalid_argument("PolicyServer: null encoder");
  if (enc_->embed_dim() != index_.dim) {
    throw std::invalid_argument("PolicyServer: encoder embed_dim does not match index");
  }
  policy_cfg_.validate();
  if (policy_cfg_.k > index_.size()) {
    throw std::invalid_argument("PolicyServer: k exceeds index size");
  }
}

PolicyServer::~PolicyServer() { stop(); }

void PolicyServer::start() {
  if (running_.load()) return;

  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw std::runtime_error("PolicyServer: socket() failed");
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(server_cfg_.port);
  if (::inet_pton(AF_INET, server_cfg_.bind_host.c_str(), &addr.sin_addr) != 1) {
    close_fd(listen_fd_);
    throw std::invalid_argument("PolicyServer: bad bind host " + server_cfg_.bind_host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    close_fd(listen_fd_);
    throw std::runtime_error(std::string("PolicyServer: bind failed: ") + std::strerror(errno));
  }
  if (::listen(listen_fd_, 128) != 0) {
    close_fd(listen_fd_);
    throw std::runtime_error("PolicyServer: listen failed");
  }

  sockaddr_in bound{};
  socklen_t blen = sizeof(bound);
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &blen);
  port_ = ntohs(bound.sin_port);

  running_.store(true);
  accept_thread_ = std::thread(&PolicyServer::accept_loop, this);
}

void PolicyServer::stop() {
  if (!running_.exchange(false)) return;
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (accept_thread_.joinable()) accept_thread_.join();
  close_fd(listen_fd_);

  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (int fd : client_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& w : workers) {
    if (w.joinable()) w.join();
  }
}

void PolicyServer::accept_loop() {
  while (running_.load()) {
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) {
      if (errno == EINTR) continue;
      break;  // listener shut down
    }
    std::lock_guard lock(mu_);
    if (!running_.load()) {
      ::close(fd);
      break;
    }
    client_fds_.push_back(fd);
    workers_.emplace_back(&PolicyServer::handle_connection, this, fd);
  }
}

void PolicyServer::handle_connection(int fd) {
  try {
    // Handshake: both sides announce magic + version.
    std::uint8_t hello[kHandshakeSize];
    if (!read_exact(fd, hello, kHandshakeSize, true)) throw ProtocolError("no handshake");
    if (std::memcmp(hello, kMagic, 4) != 0) throw ProtocolError("bad protocol magic");
    const std::uint16_t client_version =
        static_cast<std::uint16_t>(hello[4] | (hello[5] << 8));

    std::uint8_t reply[kHandshakeSize];
    std::memcpy(reply, kMagic, 4);
    reply[4] = static_cast<std::uint8_t>(kProtocolVersion & 0xff);
    reply[5] = static_cast<std::uint8_t>(kProtocolVersion >> 8);
    write_exact(fd, reply, kHandshakeSize);
    if (client_version != kProtocolVersion) throw ProtocolError("protocol version mismatch");

    std::vector<std::uint8_t> payload;
    while (running_.load() && read_frame(fd, payload, true)) {
      Status status = Status::Ok;
      core::Action action;
      double distance = 0.0;

      if (payload.size() < kRequestHeader) {
        status = Status::BadFrame;
      } else {
        const std::uint8_t flags = payload[0];
        const std::uint32_t obs_dim = get_u32_le(payload.data() + 1);
        if (payload.size() != kRequestHeader + std::size_t(obs_dim) * 4) {
          status = Status::BadFrame;  // payload length disagrees with declared obs_dim
        } else if (obs_dim != enc_->obs_dim()) {
          status = Status::DimMismatch;
        } else {
          std::vector<float> obs(obs_dim);
          for (std::uint32_t i = 0; i < obs_dim; ++i) {
            obs[i] = get_f32_le(payload.data() + kRequestHeader + 4 * i);
          }
          try {
            const policy::PredictDetail d =
                policy::predict_detail(index_, *enc_, obs, policy_cfg_);
            action = d.action;
            distance = d.nearest_distance;
            if (!(flags & kFlagClientSideScale)) {
              action = policy::scale_action(action, policy_cfg_.action_scale);
            }
          } catch (const std::exception&) {
            status = Status::Internal;
            action = core::Action{};
            distance = 0.0;
          }
        }
      }
      write_frame(fd, make_response(status, action, distance));
    }
  } catch (const std::exception&) {
    // Broken connection or handshake: drop the client, keep serving others.
  }
  ::close(fd);
  std::lock_guard lock(mu_);
  std::erase(client_fds_, fd);
}

QueryResult client_query(const std::string& host, std::uint16_t port, std::span<const float> obs,
                         std::chrono::milliseconds timeout, bool client_side_scale) {
  const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw std::runtime_error("client_query: socket() failed");

  struct Closer {
    int fd;
    ~Closer() { ::close(fd); }
  } closer{fd};

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    throw std::invalid_argument("client_query: bad host " + host);
  }

  // Non-blocking connect with a poll deadline, so an unreachable server
  // surfaces as TimeoutError rather than hanging.
  const int flags = ::fcntl(fd, F_GETFL, 0);
  ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  const int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0) {
    if (errno != EINPROGRESS) {
      throw TimeoutError(std::string("client_query: server unreachable: ") +
                         std::strerror(errno));
    }
    pollfd pfd{fd, POLLOUT, 0};
    const int pr = ::poll(&pfd, 1, static_cast<int>(timeout.count()));
    if (pr <= 0) throw TimeoutError("client_query: connect timed out");
    int err = 0;
    socklen_t elen = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &elen);
    if (err != 0) {
      throw TimeoutError(std::string("client_query: server unreachable: ") + std::strerror(err));
    }
  }
  ::fcntl(fd, F_SETFL, flags);

  timeval tv{};
  tv.tv_sec = static_cast<long>(timeout.count() / 1000);
  tv.tv_usec = static_cast<long>((timeout.count() % 1000) * 1000);
  ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
  ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));

  std::uint8_t hello[kHandshakeSize];
  std::memcpy(hello, kMagic, 4);
  hello[4] = static_cast<std::uint8_t>(kProtocolVersion & 0xff);
  hello[5] = static_cast<std::uint8_t>(kProtocolVersion >> 8);
  write_exact(fd, hello, kHandshakeSize);

  std::uint8_t reply[kHandshakeSize];
  read_exact(fd, reply, kHandshakeSize, false);
  if (std::memcmp(reply, kMagic, 4) != 0) throw ProtocolError("client_query: bad server magic");
  const std::uint16_t server_version = static_cast<std::uint16_t>(reply[4] | (reply[5] << 8));
  if (server_version != kProtocolVersion) {
    throw ProtocolError("client_query: protocol version mismatch");
  }

  std::vector<std::uint8_t> payload(kRequestHeader + obs.size() * 4);
  payload[0] = client_side_scale ? kFlagClientSideScale : 0;
  const auto obs_dim = static_cast<std::uint32_t>(obs.size());
  for (int i = 0; i < 4; ++i) {
    payload[1 + i] = static_cast<std::uint8_t>((obs_dim >> (8 * i)) & 0xff);
  }
  for (std::size_t i = 0; i < obs.size(); ++i) {
    put_f32_le(payload.data() + kRequestHeader + 4 * i, obs[i]);
  }
  write_frame(fd, payload);

  std::vector<std::uint8_t> response;
  if (!read_frame(fd, response, false)) throw ProtocolError("client_query: no response");
  if (response.size() != kResponseSize) {
    throw ProtocolError("client_query: bad response size " + std::to_string(response.size()));
  }
  if (response[0] > 3) throw ProtocolError("client_query: unknown status code");

  QueryResult result;
  result.status = static_cast<Status>(response[0]);
  for (int c = 0; c < 3; ++c) result.action.translation[c] = get_f32_le(response.data() + 1 + 4 * c);
  if (response[13] > 3) throw ProtocolError("client_query: bad gripper code");
  result.action.gripper = core::gripper_from_code(response[13]);
  result.nearest_distance = get_f32_le(response.data() + 14);
  return result;
}

}  // namespace vinn::serve
