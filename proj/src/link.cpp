#include "autolap/link.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

namespace autolap {

namespace {

struct TimedBytes {
    double due;
    std::vector<uint8_t> bytes;
};

}  // namespace

struct LoopbackLink::Side : LinkEndpoint {
    LoopbackLink* link = nullptr;
    std::deque<TimedBytes>* tx = nullptr;  // queue this side writes into
    std::deque<TimedBytes>* rx = nullptr;  // queue this side drains
    FrameDecoder decoder;

    void send_frame(const Frame& f, double now) override {
        if (link->down_) return;
        tx->push_back({now + link->latency_, encode_frame(f)});
    }
    std::vector<Frame> poll(double now) override {
        while (!rx->empty() && rx->front().due <= now) {
            decoder.feed(rx->front().bytes.data(), rx->front().bytes.size());
            rx->pop_front();
        }
        std::vector<Frame> out;
        while (auto f = decoder.next()) out.push_back(std::move(*f));
        return out;
    }
    uint64_t decode_errors() const override { return decoder.total_errors(); }

    std::deque<TimedBytes> queue;  // frames heading toward this side
};

LoopbackLink::LoopbackLink(double latency_s)
    : latency_(latency_s), a_(new Side), b_(new Side) {
    a_->link = this;
    b_->link = this;
    a_->tx = &b_->queue;
    a_->rx = &a_->queue;
    b_->tx = &a_->queue;
    b_->rx = &b_->queue;
}

LoopbackLink::~LoopbackLink() = default;
LinkEndpoint& LoopbackLink::robot_end() { return *a_; }
LinkEndpoint& LoopbackLink::learner_end() { return *b_; }

void LoopbackLink::set_down(bool down) {
    down_ = down;
    if (down) {
        a_->queue.clear();
        b_->queue.clear();
    }
}

namespace {

class TcpEndpoint : public LinkEndpoint {
public:
    explicit TcpEndpoint(int fd) : fd_(fd) {
        int one = 1;
        setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }
    ~TcpEndpoint() override {
        if (fd_ >= 0) ::close(fd_);
    }

    void send_frame(const Frame& f, double) override {
        std::vector<uint8_t> bytes = encode_frame(f);
        size_t off = 0;
        while (off < bytes.size()) {
            ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                return;  // peer gone; caller keeps running on last params
            }
            off += (size_t)n;
        }
    }

    std::vector<Frame> poll(double) override {
        uint8_t buf[65536];
        for (;;) {
            ssize_t n = ::recv(fd_, buf, sizeof(buf), MSG_DONTWAIT);
            if (n > 0) {
                decoder_.feed(buf, (size_t)n);
                continue;
            }
            break;  // 0 = closed, <0 = would block or error
        }
        std::vector<Frame> out;
        while (auto f = decoder_.next()) out.push_back(std::move(*f));
        return out;
    }

    uint64_t decode_errors() const override { return decoder_.total_errors(); }

private:
    int fd_;
    FrameDecoder decoder_;
};

}  // namespace

TcpListener::TcpListener(uint16_t port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw std::runtime_error("socket failed");
    int one = 1;
    setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(port);
    if (::bind(fd_, (sockaddr*)&addr, sizeof(addr)) != 0) {
        ::close(fd_);
        throw std::runtime_error("bind failed");
    }
    if (::listen(fd_, 1) != 0) {
        ::close(fd_);
        throw std::runtime_error("listen failed");
    }
    socklen_t len = sizeof(addr);
    getsockname(fd_, (sockaddr*)&addr, &len);
    port_ = ntohs(addr.sin_port);
}

TcpListener::~TcpListener() {
    if (fd_ >= 0) ::close(fd_);
}

std::unique_ptr<LinkEndpoint> TcpListener::accept_one() {
    int cfd = ::accept(fd_, nullptr, nullptr);
    if (cfd < 0) throw std::runtime_error("accept failed");
    return std::make_unique<TcpEndpoint>(cfd);
}

std::unique_ptr<LinkEndpoint> tcp_connect(const std::string& host, uint16_t port) {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw std::runtime_error("socket failed");
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(fd);
        throw std::runtime_error("bad address: " + host);
    }
    if (::connect(fd, (sockaddr*)&addr, sizeof(addr)) != 0) {
        ::close(fd);
        throw std::runtime_error("connect failed: " + host);
    }
    return std::make_unique<TcpEndpoint>(fd);
}

}  // namespace autolap
