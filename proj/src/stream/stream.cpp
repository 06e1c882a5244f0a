#include "hgr/stream.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "hgr/eval.hpp"

namespace hgr::stream {

namespace {

std::int64_t now_ns() {
    return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

double seconds_since(std::optional<std::int64_t>& start) {
    const auto t = now_ns();
    if (!start) start = t;
    return static_cast<double>(t - *start) * 1e-9;
}

}  // namespace

std::size_t WindowConfig::frame_count() const {
    if (frames) return *frames;
    return static_cast<std::size_t>(std::llround(seconds * assumed_fps));
}

void WindowConfig::validate() const {
    if (frames && *frames == 0) throw std::invalid_argument("window frame count must be positive");
    if (!frames && !(seconds > 0)) throw std::invalid_argument("window length must be positive");
    if (!(assumed_fps > 0)) throw std::invalid_argument("assumed frame rate must be positive");
    if (frame_count() == 0) throw std::invalid_argument("window holds no frames at the assumed frame rate");
}

TumblingWindower::TumblingWindower(WindowConfig config) : config_(config) { config_.validate(); }

std::optional<Window> TumblingWindower::push(const Frame& frame) {
    if (last_index_ && frame.index <= *last_index_) {
        throw std::invalid_argument("out-of-order frame: index " + std::to_string(frame.index) + " after " +
                                    std::to_string(*last_index_));
    }
    if (mode_ == Mode::Unknown) {
        mode_ = frame.timestamp && !config_.frames ? Mode::Time : Mode::Count;
        if (mode_ == Mode::Time) origin_ = *frame.timestamp;
    }
    if (mode_ == Mode::Time) {
        if (!frame.timestamp) {
            throw std::invalid_argument("frame " + std::to_string(frame.index) + " has no timestamp in a timed stream");
        }
        if (last_timestamp_ && *frame.timestamp < *last_timestamp_) {
            throw std::invalid_argument("out-of-order frame: index " + std::to_string(frame.index) + " at t=" +
                                        std::to_string(*frame.timestamp) + " after index " +
                                        std::to_string(*last_index_) + " at t=" + std::to_string(*last_timestamp_));
        }
    }
    last_index_ = frame.index;
    if (frame.timestamp) last_timestamp_ = frame.timestamp;

    if (mode_ == Mode::Count) {
        buffer_.push_back(frame);
        if (buffer_.size() < config_.frame_count()) return std::nullopt;
        Window w{next_count_window_++, std::move(buffer_)};
        buffer_.clear();
        return w;
    }

    const auto w = static_cast<std::uint64_t>(std::floor((*frame.timestamp - origin_) / config_.seconds + 1e-9));
    if (w > current_ && !buffer_.empty()) {
        Window out{current_, std::move(buffer_)};
        buffer_.clear();
        buffer_.push_back(frame);
        current_ = w;
        return out;
    }
    current_ = w;
    buffer_.push_back(frame);
    return std::nullopt;
}

std::optional<Window> TumblingWindower::finish() {
    std::optional<Window> out;
    if (mode_ == Mode::Time && !buffer_.empty()) {
        const double first = *buffer_.front().timestamp;
        const double last = *buffer_.back().timestamp;
        const double period = buffer_.size() > 1 ? (last - first) / static_cast<double>(buffer_.size() - 1)
                                                 : 1.0 / config_.assumed_fps;
        const double end = origin_ + static_cast<double>(current_ + 1) * config_.seconds;
        if (last + period >= end - 1e-9) out = Window{current_, std::move(buffer_)};
    }
    buffer_.clear();
    return out;
}

Emission classify_window(const nn::Checkpoint& ckpt, const Window& window) {
    if (window.frames.empty()) throw std::invalid_argument("cannot classify an empty window");
    GestureSample sample;
    sample.sample_id = "window_" + std::to_string(window.index);
    sample.source_id = "stream";
    sample.frames = window.frames;
    auto pred = eval::classify(ckpt, eval::render_for(ckpt, sample));
    Emission e;
    e.window = window.index;
    e.class_index = pred.argmax;
    e.class_name = ckpt.classes.name(pred.argmax);
    e.probabilities = std::move(pred.probabilities);
    e.start_frame = window.frames.front().index;
    e.end_frame = window.frames.back().index;
    e.frames = window.frames.size();
    return e;
}

StreamSession::StreamSession(std::shared_ptr<const nn::Checkpoint> ckpt, WindowConfig config)
    : ckpt_(std::move(ckpt)), windower_(config) {
    if (!ckpt_) throw std::invalid_argument("stream session needs a checkpoint");
}

std::optional<Emission> StreamSession::emit(std::optional<Window> w) {
    if (!w) return std::nullopt;
    Emission e = classify_window(*ckpt_, *w);
    e.wall_seconds = seconds_since(start_ns_);
    log_.push_back(e);
    return e;
}

std::optional<Emission> StreamSession::push_frame(const Frame& frame) {
    seconds_since(start_ns_);
    return emit(windower_.push(frame));
}

std::optional<Emission> StreamSession::finish() { return emit(windower_.finish()); }

AsyncPipeline::AsyncPipeline(std::shared_ptr<const nn::Checkpoint> ckpt, WindowConfig config, Sink sink,
                             std::size_t queue_capacity)
    : ckpt_(std::move(ckpt)), windower_(config), sink_(std::move(sink)), capacity_(queue_capacity) {
    if (!ckpt_) throw std::invalid_argument("stream pipeline needs a checkpoint");
    if (capacity_ == 0) throw std::invalid_argument("queue capacity must be positive");
    worker_ = std::thread([this] { run(); });
}

AsyncPipeline::~AsyncPipeline() {
    {
        std::lock_guard lock(mu_);
        closing_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
}

void AsyncPipeline::enqueue(Window w) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return queue_.size() < capacity_ || error_; });
    if (error_) std::rethrow_exception(error_);
    queue_.push_back(std::move(w));
    cv_.notify_all();
}

void AsyncPipeline::push_frame(const Frame& frame) {
    {
        std::lock_guard lock(mu_);
        if (finished_) throw std::logic_error("push_frame after finish");
        if (!start_ns_) start_ns_ = now_ns();
    }
    if (auto w = windower_.push(frame)) enqueue(std::move(*w));
}

void AsyncPipeline::finish() {
    if (auto w = windower_.finish()) enqueue(std::move(*w));
    {
        std::lock_guard lock(mu_);
        finished_ = true;
        closing_ = true;
    }
    cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    if (error_) std::rethrow_exception(error_);
}

void AsyncPipeline::run() {
    for (;;) {
        Window w;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return !queue_.empty() || closing_; });
            if (queue_.empty()) return;
            w = std::move(queue_.front());
        }
        try {
            Emission e = classify_window(*ckpt_, w);
            {
                std::lock_guard lock(mu_);
                e.wall_seconds = static_cast<double>(now_ns() - start_ns_.value_or(now_ns())) * 1e-9;
            }
            if (sink_) sink_(e);
        } catch (...) {
            std::lock_guard lock(mu_);
            error_ = std::current_exception();
            queue_.clear();
            cv_.notify_all();
            return;
        }
        {
            std::lock_guard lock(mu_);
            queue_.pop_front();
        }
        cv_.notify_all();
    }
}

std::vector<Emission> replay(const FrameSequence& recording, StreamSession& session, const ReplayOptions& opts) {
    std::vector<Emission> out;
    const auto start = std::chrono::steady_clock::now();
    std::optional<double> t0;
    for (const auto& f : recording.frames) {
        if (opts.paced && f.timestamp) {
            if (!t0) t0 = *f.timestamp;
            std::this_thread::sleep_until(start + std::chrono::duration<double>(*f.timestamp - *t0));
        }
        if (auto e = session.push_frame(f)) out.push_back(std::move(*e));
    }
    if (auto e = session.finish()) out.push_back(std::move(*e));
    return out;
}

std::string frame_to_json(const Frame& frame) {
    nlohmann::json joints = nlohmann::json::array();
    for (std::size_t i = 0; i < kJointCount; ++i) {
        if (frame.valid[i]) {
            joints.push_back({frame.positions[i].x, frame.positions[i].y, frame.positions[i].z});
        } else {
            joints.push_back(nullptr);
        }
    }
    nlohmann::json j{{"index", frame.index}, {"joints", std::move(joints)}};
    if (frame.timestamp) j["timestamp"] = *frame.timestamp;
    return j.dump();
}

Frame frame_from_json(std::string_view line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("malformed frame JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("index") || !j["index"].is_number_unsigned()) {
        throw std::invalid_argument("frame JSON needs a non-negative integer \"index\"");
    }
    Frame f;
    f.index = j["index"].get<std::uint64_t>();
    if (j.contains("timestamp") && !j["timestamp"].is_null()) {
        if (!j["timestamp"].is_number()) throw std::invalid_argument("frame timestamp must be a number");
        f.timestamp = j["timestamp"].get<double>();
    }
    const auto& joints = j.value("joints", nlohmann::json());
    if (!joints.is_array() || joints.size() != kJointCount) {
        throw std::invalid_argument("frame " + std::to_string(f.index) + ": \"joints\" must hold " +
                                    std::to_string(kJointCount) + " entries");
    }
    for (std::size_t i = 0; i < kJointCount; ++i) {
        const auto& p = joints[i];
        const auto id = JointId::from_index(i);
        if (p.is_null()) {
            f.invalidate(id);
            continue;
        }
        if (!p.is_array() || p.size() != 3 || !p[0].is_number() || !p[1].is_number() || !p[2].is_number()) {
            throw std::invalid_argument("frame " + std::to_string(f.index) + ": joint " + id.name() +
                                        " must be [x, y, z] or null");
        }
        f.set(id, {p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
    }
    return f;
}

std::string emission_to_json(const Emission& e) {
    return nlohmann::json{{"window", e.window},
                          {"class", e.class_name},
                          {"class_index", e.class_index},
                          {"probabilities", e.probabilities},
                          {"start_frame", e.start_frame},
                          {"end_frame", e.end_frame},
                          {"frames", e.frames}}
        .dump();
}

void serve_tcp_lines(std::uint16_t port, const std::function<void(const std::string&)>& on_line,
                     const std::function<void(std::uint16_t)>& on_listening) {
    const int server = ::socket(AF_INET, SOCK_STREAM, 0);
    if (server < 0) throw std::runtime_error(std::string("socket: ") + std::strerror(errno));
    struct Closer {
        int fd;
        ~Closer() { ::close(fd); }
    } server_guard{server};
    int yes = 1;
    ::setsockopt(server, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    if (::bind(server, reinterpret_cast<sockaddr*>(&addr), sizeof addr) < 0) {
        throw std::runtime_error("cannot bind 127.0.0.1:" + std::to_string(port) + ": " + std::strerror(errno));
    }
    if (::listen(server, 1) < 0) throw std::runtime_error(std::string("listen: ") + std::strerror(errno));
    socklen_t len = sizeof addr;
    ::getsockname(server, reinterpret_cast<sockaddr*>(&addr), &len);
    if (on_listening) on_listening(ntohs(addr.sin_port));

    const int conn = ::accept(server, nullptr, nullptr);
    if (conn < 0) throw std::runtime_error(std::string("accept: ") + std::strerror(errno));
    Closer conn_guard{conn};
    std::string pending;
    char buf[65536];
    for (;;) {
        const ssize_t n = ::recv(conn, buf, sizeof buf, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw std::runtime_error(std::string("recv: ") + std::strerror(errno));
        }
        if (n == 0) break;
        pending.append(buf, static_cast<std::size_t>(n));
        std::size_t pos;
        while ((pos = pending.find('\n')) != std::string::npos) {
            std::string line = pending.substr(0, pos);
            pending.erase(0, pos + 1);
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) on_line(line);
        }
    }
    if (!pending.empty()) on_line(pending);
}

}  // namespace hgr::stream
