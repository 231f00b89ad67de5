#include "sgsl/channel.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>

namespace sgsl::proto {

class LoopbackPair::End : public Channel {
public:
    End(std::shared_ptr<Queue> out, std::shared_ptr<Queue> in)
        : out_(std::move(out)), in_(std::move(in)) {}

    bool send(const Bytes& msg) override {
        std::lock_guard lock(out_->mu);
        if (out_->closed) return false;
        out_->items.push_back(msg);
        out_->cv.notify_one();
        return true;
    }

    std::optional<Bytes> recv() override {
        std::unique_lock lock(in_->mu);
        in_->cv.wait(lock, [&] { return !in_->items.empty() || in_->closed; });
        if (in_->items.empty()) return std::nullopt;
        Bytes msg = std::move(in_->items.front());
        in_->items.pop_front();
        return msg;
    }

private:
    std::shared_ptr<Queue> out_, in_;
};

LoopbackPair::LoopbackPair()
    : c2s_(std::make_shared<Queue>()), s2c_(std::make_shared<Queue>()),
      client_(std::make_unique<End>(c2s_, s2c_)), server_(std::make_unique<End>(s2c_, c2s_)) {}

// ---- tcp -------------------------------------------------------------------

namespace {

bool write_all(int fd, const uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::write(fd, data, len);
        if (n <= 0) return false;
        data += n;
        len -= static_cast<size_t>(n);
    }
    return true;
}

bool read_all(int fd, uint8_t* data, size_t len) {
    while (len > 0) {
        ssize_t n = ::read(fd, data, len);
        if (n <= 0) return false;
        data += n;
        len -= static_cast<size_t>(n);
    }
    return true;
}

} // namespace

std::unique_ptr<TcpChannel> TcpChannel::connect(const std::string& host, uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (getaddrinfo(host.c_str(), std::to_string(port).c_str(), &hints, &res) != 0) return nullptr;
    int fd = -1;
    for (addrinfo* it = res; it; it = it->ai_next) {
        fd = ::socket(it->ai_family, it->ai_socktype, it->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, it->ai_addr, it->ai_addrlen) == 0) break;
        ::close(fd);
        fd = -1;
    }
    freeaddrinfo(res);
    if (fd < 0) return nullptr;
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<TcpChannel>(fd);
}

TcpChannel::~TcpChannel() {
    if (fd_ >= 0) ::close(fd_);
}

bool TcpChannel::send(const Bytes& msg) {
    Bytes prefix;
    put_u32le(prefix, static_cast<uint32_t>(msg.size()));
    return write_all(fd_, prefix.data(), prefix.size()) && write_all(fd_, msg.data(), msg.size());
}

std::optional<Bytes> TcpChannel::recv() {
    uint8_t len_buf[4];
    if (!read_all(fd_, len_buf, 4)) return std::nullopt;
    uint32_t len = get_u32le(len_buf);
    if (len > (64u << 20)) return std::nullopt; // refuse absurd frames
    Bytes msg(len);
    if (!read_all(fd_, msg.data(), len)) return std::nullopt;
    return msg;
}

TcpListener::TcpListener(uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw DataError("socket() failed");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_ANY);
    addr.sin_port = htons(port);
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
        ::close(fd_);
        throw DataError("bind() failed on port " + std::to_string(port));
    }
    if (::listen(fd_, 8) != 0) {
        ::close(fd_);
        throw DataError("listen() failed");
    }
    socklen_t len = sizeof(addr);
    getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<TcpChannel> TcpListener::accept() {
    int fd = ::accept(fd_, nullptr, nullptr);
    if (fd < 0) return nullptr;
    int one = 1;
    setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return std::make_unique<TcpChannel>(fd);
}

} // namespace sgsl::proto
