#pragma once

#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>

#include "sgsl/common.hpp"

namespace sgsl::proto {

// reliable ordered message transport; messages are whole encoded frames
class Channel {
public:
    virtual ~Channel() = default;
    virtual bool send(const Bytes& msg) = 0;
    virtual std::optional<Bytes> recv() = 0; // blocking; nullopt on close
};

// in-process bidirectional queue pair for tests and single-process runs
class LoopbackPair {
public:
    LoopbackPair();
    Channel& client_end() { return *client_; }
    Channel& server_end() { return *server_; }

private:
    struct Queue {
        std::mutex mu;
        std::condition_variable cv;
        std::deque<Bytes> items;
        bool closed = false;
    };
    class End;
    std::shared_ptr<Queue> c2s_, s2c_;
    std::unique_ptr<End> client_, server_;
};

// blocking TCP transport with u32 little-endian length prefixes
class TcpChannel : public Channel {
public:
    static std::unique_ptr<TcpChannel> connect(const std::string& host, uint16_t port);
    explicit TcpChannel(int fd) : fd_(fd) {}
    ~TcpChannel() override;

    bool send(const Bytes& msg) override;
    std::optional<Bytes> recv() override;

private:
    int fd_ = -1;
};

class TcpListener {
public:
    explicit TcpListener(uint16_t port); // throws DataError on bind failure
    ~TcpListener();
    std::unique_ptr<TcpChannel> accept();
    uint16_t port() const { return port_; }

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

} // namespace sgsl::proto
