// stream.hpp
// Wire-level interrogator emulator and its subscriber client.
//
// Protocol (newline-delimited text over TCP):
//   handshake:  FBGSTREAM/1 channels=fbg1,fbg2 rate_hz=<rate>
//   frame:      <t> <wavelength...>   (one value per announced channel,
//                                      shortest round-trip decimal form)
// The server paces frames against a deadline schedule, fans out to any number
// of subscribers, and disconnects consumers whose queue backs up past
// kMaxQueuedFrames instead of back-pressuring the source.

#pragma once

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "fbgforce/errors.hpp"
#include "fbgforce/io_util.hpp"
#include "fbgforce/types.hpp"

namespace fbg {

inline constexpr int kStreamSchemaVersion = 1;
inline constexpr std::size_t kMaxQueuedFrames = 1000;

struct StreamFrame {
    double t = 0.0;
    std::vector<double> values;  // one per channel, handshake order
};

namespace wire {

inline std::string handshake_line(const std::vector<std::string>& channels, double rate_hz) {
    std::string line = "FBGSTREAM/" + std::to_string(kStreamSchemaVersion) + " channels=";
    for (std::size_t i = 0; i < channels.size(); ++i) {
        if (i) line += ',';
        line += channels[i];
    }
    line += " rate_hz=" + ioutil::format_double(rate_hz);
    return line;
}

inline std::string frame_line(const StreamFrame& frame) {
    std::string line = ioutil::format_double(frame.t);
    for (double v : frame.values) {
        line += ' ';
        line += ioutil::format_double(v);
    }
    return line;
}

} // namespace wire

namespace detail_net {

struct Connection {
    int fd = -1;
    std::deque<std::string> queue;
    std::mutex mutex;
    std::condition_variable cv;
    bool closed = false;    // no more frames will be queued
    bool dead = false;      // writer gave up (error or overflow)
    std::thread writer;
};

inline void close_fd(int& fd) {
    if (fd >= 0) {
        ::shutdown(fd, SHUT_RDWR);
        ::close(fd);
        fd = -1;
    }
}

inline bool send_all(int fd, const char* data, std::size_t len) {
    while (len > 0) {
        const ssize_t n = ::send(fd, data, len, MSG_NOSIGNAL);
        if (n <= 0) return false;
        data += n;
        len -= static_cast<std::size_t>(n);
    }
    return true;
}

} // namespace detail_net

// Frame source: returns frames until exhausted.
using FrameSource = std::function<std::optional<StreamFrame>()>;

class StreamServer {
public:
    struct Options {
        std::uint16_t port = 0;  // 0 = ephemeral
        double rate_hz = 1000.0;
        std::vector<std::string> channels = {"fbg1", "fbg2"};
    };

    StreamServer(FrameSource source, Options options)
        : source_(std::move(source)), options_(std::move(options)) {
        if (!(options_.rate_hz > 0.0)) throw ConfigError("stream rate must be positive");
        if (options_.channels.empty()) throw ConfigError("stream needs at least one channel");
        open_listener();
        accept_thread_ = std::thread([this] { accept_loop(); });
    }

    StreamServer(const std::vector<WavelengthSample>& samples, Options options)
        : StreamServer(replay_source(samples), std::move(options)) {}

    ~StreamServer() { stop(); }

    StreamServer(const StreamServer&) = delete;
    StreamServer& operator=(const StreamServer&) = delete;

    std::uint16_t port() const { return bound_port_; }

    std::size_t subscriber_count() {
        std::lock_guard lock(connections_mutex_);
        std::size_t n = 0;
        for (const auto& c : connections_)
            if (!c->dead) ++n;
        return n;
    }

    // Blocks until at least n subscribers are connected (test/CLI convenience).
    bool wait_for_subscribers(std::size_t n, std::chrono::milliseconds timeout) {
        const auto deadline = std::chrono::steady_clock::now() + timeout;
        while (std::chrono::steady_clock::now() < deadline) {
            if (subscriber_count() >= n) return true;
            std::this_thread::sleep_for(std::chrono::milliseconds(5));
        }
        return subscriber_count() >= n;
    }

    // Starts pacing frames from the source. Returns immediately.
    void begin_streaming() {
        bool expected = false;
        if (!streaming_.compare_exchange_strong(expected, true)) return;
        pacing_thread_ = std::thread([this] { pace_loop(); });
    }

    // Waits until the source is exhausted and all queues have drained.
    void wait_until_finished() {
        if (pacing_thread_.joinable()) pacing_thread_.join();
        for (;;) {
            {
                std::lock_guard lock(connections_mutex_);
                bool pending = false;
                for (const auto& c : connections_) {
                    std::lock_guard qlock(c->mutex);
                    if (!c->dead && !c->queue.empty()) pending = true;
                }
                if (!pending) break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(2));
        }
    }

    void stop() {
        if (stopping_.exchange(true)) return;
        detail_net::close_fd(listen_fd_);
        if (accept_thread_.joinable()) accept_thread_.join();
        if (pacing_thread_.joinable()) pacing_thread_.join();
        std::lock_guard lock(connections_mutex_);
        for (auto& c : connections_) {
            {
                std::lock_guard qlock(c->mutex);
                c->closed = true;
            }
            c->cv.notify_all();
        }
        for (auto& c : connections_) {
            if (c->writer.joinable()) c->writer.join();
            detail_net::close_fd(c->fd);
        }
        connections_.clear();
    }

    static FrameSource replay_source(std::vector<WavelengthSample> samples) {
        auto index = std::make_shared<std::size_t>(0);
        auto data = std::make_shared<std::vector<WavelengthSample>>(std::move(samples));
        return [index, data]() -> std::optional<StreamFrame> {
            if (*index >= data->size()) return std::nullopt;
            const auto& s = (*data)[(*index)++];
            return StreamFrame{s.t, {s.lambda1_pm, s.lambda2_pm}};
        };
    }

private:
    void open_listener() {
        listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (listen_fd_ < 0) throw BindError("socket() failed");
        const int one = 1;
        ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_ANY);
        addr.sin_port = htons(options_.port);
        if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            detail_net::close_fd(listen_fd_);
            throw BindError("cannot bind port " + std::to_string(options_.port) + ": " +
                            std::strerror(errno));
        }
        if (::listen(listen_fd_, 16) != 0) {
            detail_net::close_fd(listen_fd_);
            throw BindError("listen() failed");
        }
        sockaddr_in bound{};
        socklen_t len = sizeof(bound);
        ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
        bound_port_ = ntohs(bound.sin_port);
    }

    void accept_loop() {
        for (;;) {
            const int fd = ::accept(listen_fd_, nullptr, nullptr);
            if (fd < 0) return;  // listener closed
            const int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));

            auto conn = std::make_unique<detail_net::Connection>();
            conn->fd = fd;
            const std::string hello =
                wire::handshake_line(options_.channels, options_.rate_hz) + "\n";
            if (!detail_net::send_all(fd, hello.data(), hello.size())) {
                detail_net::close_fd(conn->fd);
                continue;
            }
            auto* raw = conn.get();
            conn->writer = std::thread([raw] { writer_loop(raw); });
            std::lock_guard lock(connections_mutex_);
            connections_.push_back(std::move(conn));
        }
    }

    static void writer_loop(detail_net::Connection* conn) {
        for (;;) {
            std::string line;
            {
                std::unique_lock lock(conn->mutex);
                conn->cv.wait(lock, [conn] {
                    return conn->dead || conn->closed || !conn->queue.empty();
                });
                if (conn->dead) return;
                if (conn->queue.empty()) {
                    if (conn->closed) {
                        // drained and done: signal end-of-stream to the peer
                        if (conn->fd >= 0) ::shutdown(conn->fd, SHUT_WR);
                        return;
                    }
                    continue;
                }
                line = std::move(conn->queue.front());
                conn->queue.pop_front();
            }
            if (!detail_net::send_all(conn->fd, line.data(), line.size())) {
                std::lock_guard lock(conn->mutex);
                conn->dead = true;  // this connection only
                return;
            }
        }
    }

    void pace_loop() {
        using clock = std::chrono::steady_clock;
        const auto start = clock::now();
        const auto period =
            std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / options_.rate_hz));
        std::size_t k = 0;
        while (!stopping_) {
            auto frame = source_();
            if (!frame) break;
            std::this_thread::sleep_until(start + period * k);
            ++k;
            broadcast(wire::frame_line(*frame) + "\n");
        }
        // no more frames: let writers drain and finish
        std::lock_guard lock(connections_mutex_);
        for (auto& c : connections_) {
            {
                std::lock_guard qlock(c->mutex);
                c->closed = true;
            }
            c->cv.notify_all();
        }
    }

    void broadcast(const std::string& line) {
        std::lock_guard lock(connections_mutex_);
        for (auto& c : connections_) {
            std::lock_guard qlock(c->mutex);
            if (c->dead || c->closed) continue;
            if (c->queue.size() >= kMaxQueuedFrames) {
                // slow consumer: cut it loose rather than stalling the source;
                // shutdown unblocks any in-flight send, the fd closes in stop()
                c->dead = true;
                if (c->fd >= 0) ::shutdown(c->fd, SHUT_RDWR);
                c->cv.notify_all();
                continue;
            }
            c->queue.push_back(line);
            c->cv.notify_one();
        }
    }

    FrameSource source_;
    Options options_;
    int listen_fd_ = -1;
    std::uint16_t bound_port_ = 0;
    std::thread accept_thread_;
    std::thread pacing_thread_;
    std::atomic<bool> streaming_{false};
    std::atomic<bool> stopping_{false};
    std::mutex connections_mutex_;
    std::vector<std::unique_ptr<detail_net::Connection>> connections_;
};

// Blocking subscriber. Yields samples in arrival order; terminates cleanly
// (nullopt) when the service closes the stream.
class StreamSubscriber {
public:
    StreamSubscriber(const std::string& host, std::uint16_t port) {
        fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
        if (fd_ < 0) throw ConnectError("socket() failed");
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_port = htons(port);
        if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
            detail_net::close_fd(fd_);
            throw ConnectError("bad address " + host);
        }
        if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
            detail_net::close_fd(fd_);
            throw ConnectError("cannot connect to " + host + ":" + std::to_string(port));
        }
        parse_handshake(read_line_blocking());
    }

    ~StreamSubscriber() { detail_net::close_fd(fd_); }

    StreamSubscriber(const StreamSubscriber&) = delete;
    StreamSubscriber& operator=(const StreamSubscriber&) = delete;

    int schema_version() const { return schema_version_; }
    const std::vector<std::string>& channels() const { return channels_; }
    double rate_hz() const { return rate_hz_; }

    // Next sample, or nullopt once the service has closed the stream.
    std::optional<WavelengthSample> next() {
        const auto line = read_line();
        if (!line) return std::nullopt;
        ++frame_number_;

        const auto fields = ioutil::split(*line, ' ');
        if (fields.size() != channels_.size() + 1)
            throw ProtocolError("frame " + std::to_string(frame_number_) + ": expected " +
                                std::to_string(channels_.size() + 1) + " fields in '" +
                                std::string(*line) + "'");
        double t = 0.0;
        if (!ioutil::parse_double(fields[0], t))
            throw ProtocolError("frame " + std::to_string(frame_number_) + ": bad timestamp '" +
                                std::string(fields[0]) + "'");
        std::vector<double> values(channels_.size());
        for (std::size_t i = 0; i < channels_.size(); ++i) {
            if (!ioutil::parse_double(fields[i + 1], values[i]))
                throw ProtocolError("frame " + std::to_string(frame_number_) + ": bad value '" +
                                    std::string(fields[i + 1]) + "'");
        }
        return WavelengthSample{t, values[0], values[1]};
    }

private:
    void parse_handshake(std::optional<std::string> line) {
        if (!line) throw ProtocolError("connection closed before handshake");
        const auto fields = ioutil::split(*line, ' ');
        if (fields.empty() || fields[0].rfind("FBGSTREAM/", 0) != 0)
            throw ProtocolError("not an FBGSTREAM service: '" + *line + "'");
        double version = -1.0;
        if (!ioutil::parse_double(fields[0].substr(10), version))
            throw ProtocolError("malformed schema version in '" + *line + "'");
        schema_version_ = static_cast<int>(version);
        if (schema_version_ != kStreamSchemaVersion)
            throw ProtocolError("schema version mismatch: got " +
                                std::to_string(schema_version_) + ", need " +
                                std::to_string(kStreamSchemaVersion));
        for (std::size_t i = 1; i < fields.size(); ++i) {
            const std::string_view f = fields[i];
            if (f.rfind("channels=", 0) == 0) {
                for (auto name : ioutil::split(f.substr(9), ','))
                    channels_.emplace_back(name);
            } else if (f.rfind("rate_hz=", 0) == 0) {
                if (!ioutil::parse_double(f.substr(8), rate_hz_))
                    throw ProtocolError("malformed rate in '" + *line + "'");
            }
        }
        if (channels_.size() != 2)
            throw ProtocolError("expected a dual-channel stream, got " +
                                std::to_string(channels_.size()) + " channels");
    }

    std::optional<std::string> read_line() {
        for (;;) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                if (!line.empty() && line.back() == '\r') line.pop_back();
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(fd_, chunk, sizeof(chunk), 0);
            if (n <= 0) {
                if (!buffer_.empty()) {
                    std::string line = std::move(buffer_);
                    buffer_.clear();
                    return line;
                }
                return std::nullopt;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    std::string read_line_blocking() {
        auto line = read_line();
        if (!line) throw ProtocolError("connection closed before handshake");
        return *line;
    }

    int fd_ = -1;
    std::string buffer_;
    int schema_version_ = 0;
    std::vector<std::string> channels_;
    double rate_hz_ = 0.0;
    long frame_number_ = 0;
};

} // namespace fbg
