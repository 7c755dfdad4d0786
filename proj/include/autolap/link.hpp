#pragma once

#include <deque>
#include <memory>
#include <string>
#include <vector>

#include "autolap/wire.hpp"

namespace autolap {

// One side of a robot <-> learner connection. Frames go out as encoded bytes
// and come back through a FrameDecoder, so both transports exercise the full
// codec path. `now` is sim time in seconds; real transports ignore it.
class LinkEndpoint {
public:
    virtual ~LinkEndpoint() = default;
    virtual void send_frame(const Frame& f, double now) = 0;
    virtual std::vector<Frame> poll(double now) = 0;
    virtual uint64_t decode_errors() const = 0;
};

// In-process pair of endpoints joined by two delay queues. Deterministic:
// delivery order is send order, a frame sent at t is visible to poll(t')
// once t' >= t + latency. set_down(true) discards frames in flight and
// everything sent until the link comes back up.
class LoopbackLink {
public:
    explicit LoopbackLink(double latency_s = 0.0);
    ~LoopbackLink();
    LinkEndpoint& robot_end();
    LinkEndpoint& learner_end();
    void set_down(bool down);
    bool down() const { return down_; }

private:
    struct Side;
    double latency_;
    bool down_ = false;
    std::unique_ptr<Side> a_, b_;
};

// Blocking-accept single-connection TCP transport. The learner listens, the
// robot connects; each side owns one endpoint. Sends are blocking writes,
// polls drain whatever the socket has buffered.
class TcpListener {
public:
    explicit TcpListener(uint16_t port);  // port 0 picks a free port
    ~TcpListener();
    uint16_t port() const { return port_; }
    std::unique_ptr<LinkEndpoint> accept_one();

private:
    int fd_ = -1;
    uint16_t port_ = 0;
};

std::unique_ptr<LinkEndpoint> tcp_connect(const std::string& host, uint16_t port);

}  // namespace autolap
