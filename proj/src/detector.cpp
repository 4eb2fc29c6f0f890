#include "streamscene/detector.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <mutex>

#include <spdlog/spdlog.h>

#include "binary_io.hpp"
#include "streamscene/errors.hpp"

namespace streamscene {

namespace {

void ignore_sigpipe_once() {
  static std::once_flag flag;
  std::call_once(flag, [] { ::signal(SIGPIPE, SIG_IGN); });
}

// Reads exactly n bytes. Returns the number read before EOF.
std::size_t read_exact(int fd, char* buf, std::size_t n,
                       std::chrono::steady_clock::time_point deadline, bool use_deadline) {
  std::size_t got = 0;
  while (got < n) {
    if (use_deadline) {
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw ProtocolError("timed out waiting for detector output");
      pollfd p{fd, POLLIN, 0};
      const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
      if (rc < 0) {
        if (errno == EINTR) continue;
        throw ProtocolError(std::string("poll failed: ") + std::strerror(errno));
      }
      if (rc == 0) throw ProtocolError("timed out waiting for detector output");
    }
    const ssize_t r = ::read(fd, buf + got, n - got);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("read failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

}  // namespace

std::string encode_frame(std::string_view payload) {
  if (payload.size() > kMaxFrameBytes) throw ProtocolError("frame too large");
  std::string out;
  out.reserve(payload.size() + 4);
  detail::put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out.append(payload);
  return out;
}

std::string encode_hello() { return "HELO" + std::string(kDetectorProtocol); }

std::string encode_detection_request(const MemorySnapshot& memory,
                                     const CategoryVocabulary& categories) {
  std::string cats;
  for (const auto& n : categories.names()) {
    if (!cats.empty()) cats += '\n';
    cats += n;
  }
  std::string out = "DTCT";
  detail::put_u32(out, static_cast<std::uint32_t>(cats.size()));
  out += cats;
  out += encode_memory(memory.data());
  return out;
}

bool decode_request(std::string_view payload, DetectionRequest& out) {
  if (payload.size() < 4) throw ProtocolError("request shorter than its tag");
  const auto tag = payload.substr(0, 4);
  if (tag == "HELO") {
    if (payload.substr(4) != kDetectorProtocol) {
      throw ProtocolError("unsupported protocol '" + std::string(payload.substr(4)) + "'");
    }
    return false;
  }
  if (tag != "DTCT") throw ProtocolError("unknown request tag '" + std::string(tag) + "'");
  try {
    detail::Reader r(payload.substr(4));
    const std::uint32_t n = r.u32();
    const std::string_view cats = r.take(n);
    out.categories.clear();
    std::size_t start = 0;
    while (start <= cats.size() && !cats.empty()) {
      const std::size_t nl = cats.find('\n', start);
      const std::size_t stop = nl == std::string_view::npos ? cats.size() : nl;
      out.categories.emplace_back(cats.substr(start, stop - start));
      if (nl == std::string_view::npos) break;
      start = nl + 1;
    }
    out.memory = decode_memory(payload.substr(8 + n));
  } catch (const IoError& e) {
    throw ProtocolError(std::string("malformed detection request: ") + e.what());
  }
  return true;
}

bool read_frame(int fd, std::string& payload, std::chrono::milliseconds timeout) {
  const bool use_deadline = timeout.count() > 0;
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  char header[4];
  const std::size_t got = read_exact(fd, header, 4, deadline, use_deadline);
  if (got == 0) return false;
  if (got < 4) throw ProtocolError("truncated frame header");
  const std::uint32_t len = detail::Reader(std::string_view(header, 4)).u32();
  if (len > kMaxFrameBytes) throw ProtocolError("frame length exceeds limit");
  payload.assign(len, '\0');
  if (read_exact(fd, payload.data(), len, deadline, use_deadline) != len) {
    throw ProtocolError("truncated frame payload");
  }
  return true;
}

void write_frame(int fd, std::string_view payload) {
  ignore_sigpipe_once();
  const std::string bytes = encode_frame(payload);
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t w = ::write(fd, bytes.data() + sent, bytes.size() - sent);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ProtocolError(std::string("write failed: ") + std::strerror(errno));
    }
    sent += static_cast<std::size_t>(w);
  }
}

ProcessDetector::ProcessDetector(std::string command, std::chrono::milliseconds timeout)
    : command_(std::move(command)), timeout_(timeout) {
  ignore_sigpipe_once();
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw ProtocolError("pipe() failed");
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw ProtocolError("pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw ProtocolError("fork() failed");
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  pid_ = pid;
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  to_child_ = in_pipe[1];
  from_child_ = out_pipe[0];
  ::fcntl(to_child_, F_SETFD, FD_CLOEXEC);
  ::fcntl(from_child_, F_SETFD, FD_CLOEXEC);

  transcript_.push_back("start: " + command_);
  try {
    write_frame(to_child_, encode_hello());
    std::string reply;
    if (!read_frame(from_child_, reply, timeout_)) fail("detector exited during handshake");
    const std::string expected = "OK " + std::string(kDetectorProtocol);
    if (reply != expected) fail("unexpected handshake reply '" + reply + "'");
    transcript_.push_back("handshake: ok");
  } catch (const ProtocolError& e) {
    if (!e.transcript().empty()) {
      shutdown();
      throw;
    }
    fail(std::string("handshake failed: ") + e.what());
  }
}

ProcessDetector::~ProcessDetector() { shutdown(); }

void ProcessDetector::shutdown() {
  if (to_child_ >= 0) ::close(to_child_);
  if (from_child_ >= 0) ::close(from_child_);
  to_child_ = from_child_ = -1;
  if (pid_ > 0) {
    // Give the detector a moment to exit on EOF before killing it.
    for (int i = 0; i < 50; ++i) {
      int status = 0;
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        pid_ = -1;
        return;
      }
      ::usleep(10000);
    }
    ::kill(pid_, SIGKILL);
    ::waitpid(pid_, nullptr, 0);
    pid_ = -1;
  }
}

void ProcessDetector::fail(const std::string& what) {
  transcript_.push_back("error: " + what);
  shutdown();
  throw ProtocolError(what, transcript_);
}

std::string ProcessDetector::detect(const MemorySnapshot& memory,
                                    const CategoryVocabulary& categories) {
  if (to_child_ < 0) fail("detector process is not running");
  ++requests_;
  const std::string req = encode_detection_request(memory, categories);
  transcript_.push_back("request " + std::to_string(requests_) + ": t=" +
                        std::to_string(memory.t()) + " points=" + std::to_string(memory.size()) +
                        " bytes=" + std::to_string(req.size()));
  std::string reply;
  try {
    write_frame(to_child_, req);
    if (!read_frame(from_child_, reply, timeout_)) fail("detector closed its output");
  } catch (const ProtocolError& e) {
    if (!e.transcript().empty()) throw;
    fail(e.what());
  }
  transcript_.push_back("response " + std::to_string(requests_) + ": bytes=" +
                        std::to_string(reply.size()));
  return reply;
}

int serve_detector(Detector& detector, int in_fd, int out_fd) {
  try {
    std::string payload;
    while (read_frame(in_fd, payload, std::chrono::milliseconds(0))) {
      DetectionRequest req;
      if (!decode_request(payload, req)) {
        write_frame(out_fd, "OK " + std::string(kDetectorProtocol));
        continue;
      }
      CategoryVocabulary cats(req.categories);
      const MemorySnapshot snap(std::move(req.memory));
      write_frame(out_fd, detector.detect(snap, cats));
    }
  } catch (const ProtocolError& e) {
    spdlog::error("detector server: {}", e.what());
    return 2;
  }
  return 0;
}

}  // namespace streamscene
