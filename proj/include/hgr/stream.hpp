#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "hgr/nn/checkpoint.hpp"
#include "hgr/skeleton.hpp"

namespace hgr::stream {

struct WindowConfig {
    double seconds = 5.0;
    /// When set, windows are counted in frames even if timestamps exist.
    std::optional<std::size_t> frames;
    /// Used to size windows for frames without timestamps.
    double assumed_fps = 100.0;

    std::size_t frame_count() const;
    void validate() const;
};

/// Frames of one elapsed tumbling window.
struct Window {
    std::uint64_t index = 0;
    std::vector<Frame> frames;
};

/// Splits an ordered frame stream into non-overlapping windows. With
/// timestamps, frame t belongs to window floor((t - t0) / seconds) and a window
/// closes when a frame of a later window arrives. Without timestamps, a window
/// closes as soon as it holds frame_count() frames.
class TumblingWindower {
public:
    explicit TumblingWindower(WindowConfig config = {});

    /// Throws std::invalid_argument naming both indices on an out-of-order frame.
    std::optional<Window> push(const Frame& frame);
    /// End of stream. Returns the open window only if it is complete, i.e. the
    /// last frame plus one nominal frame period reaches its end.
    std::optional<Window> finish();
    /// Frames of the open window.
    std::size_t buffered() const { return buffer_.size(); }
    const WindowConfig& config() const { return config_; }

private:
    enum class Mode { Unknown, Time, Count };

    WindowConfig config_;
    Mode mode_ = Mode::Unknown;
    double origin_ = 0;
    std::uint64_t current_ = 0;
    std::uint64_t next_count_window_ = 0;
    std::optional<std::uint64_t> last_index_;
    std::optional<double> last_timestamp_;
    std::vector<Frame> buffer_;
};

struct Emission {
    std::uint64_t window = 0;
    std::size_t class_index = 0;
    std::string class_name;
    std::vector<double> probabilities;
    std::uint64_t start_frame = 0;
    std::uint64_t end_frame = 0;
    std::size_t frames = 0;
    /// Seconds since the session's first frame was pushed (wall clock).
    double wall_seconds = 0;
};

/// Renders and classifies a window exactly as the batch pipeline would.
Emission classify_window(const nn::Checkpoint& ckpt, const Window& window);

/// Synchronous session: classification happens inside push_frame.
class StreamSession {
public:
    StreamSession(std::shared_ptr<const nn::Checkpoint> ckpt, WindowConfig config = {});

    std::optional<Emission> push_frame(const Frame& frame);
    std::optional<Emission> finish();

    const std::vector<Emission>& log() const { return log_; }
    std::size_t buffered() const { return windower_.buffered(); }

private:
    std::optional<Emission> emit(std::optional<Window> w);

    std::shared_ptr<const nn::Checkpoint> ckpt_;
    TumblingWindower windower_;
    std::vector<Emission> log_;
    std::optional<std::int64_t> start_ns_;
};

/// Windowing on the caller's thread, classification on a worker. At most
/// `queue_capacity` elapsed windows wait for the worker; push_frame blocks
/// beyond that. The sink is called from the worker in window order.
class AsyncPipeline {
public:
    using Sink = std::function<void(const Emission&)>;

    AsyncPipeline(std::shared_ptr<const nn::Checkpoint> ckpt, WindowConfig config, Sink sink,
                  std::size_t queue_capacity = 2);
    ~AsyncPipeline();
    AsyncPipeline(const AsyncPipeline&) = delete;
    AsyncPipeline& operator=(const AsyncPipeline&) = delete;

    void push_frame(const Frame& frame);
    /// Flushes a complete final window, waits for the worker and rethrows any
    /// classification error.
    void finish();

private:
    void enqueue(Window w);
    void run();

    std::shared_ptr<const nn::Checkpoint> ckpt_;
    TumblingWindower windower_;
    Sink sink_;
    std::size_t capacity_;
    std::mutex mu_;
    std::condition_variable cv_;
    std::deque<Window> queue_;
    bool closing_ = false;
    bool finished_ = false;
    std::exception_ptr error_;
    std::optional<std::int64_t> start_ns_;
    std::thread worker_;
};

struct ReplayOptions {
    /// Sleep so that frames are delivered at their recorded timestamps.
    bool paced = false;
};

/// Pushes every frame in order and returns the emissions, including a
/// complete final window.
std::vector<Emission> replay(const FrameSequence& recording, StreamSession& session, const ReplayOptions& opts = {});

/// One frame as a JSON object: {"index", "timestamp", "joints": [[x, y, z] | null, ...]}.
std::string frame_to_json(const Frame& frame);
/// Throws std::invalid_argument on malformed input.
Frame frame_from_json(std::string_view line);
std::string emission_to_json(const Emission& e);

/// Accepts one connection on 127.0.0.1:`port` and hands every received line
/// to `on_line` until the peer closes.
void serve_tcp_lines(std::uint16_t port, const std::function<void(const std::string&)>& on_line,
                     const std::function<void(std::uint16_t)>& on_listening = {});

}  // namespace hgr::stream
