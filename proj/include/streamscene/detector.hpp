#pragma once

#include <chrono>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "streamscene/categories.hpp"
#include "streamscene/memory.hpp"

namespace streamscene {

// Something that turns a memory snapshot into scene-description text.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual std::string detect(const MemorySnapshot& memory,
                             const CategoryVocabulary& categories) = 0;
};

// Wire protocol between the harness and an external detector process.
//
// Every message in either direction is a frame: u32 little-endian payload
// length followed by the payload.
//
// Harness -> detector payloads start with a 4-byte tag:
//   "HELO" + protocol string           handshake, sent once after start
//   "DTCT" + u32 category-list length + category names joined by '\n'
//          + memory container (see encode_memory)
// Detector -> harness payloads:
//   handshake reply: the protocol string prefixed with "OK "
//   detection reply: scene-description text (UTF-8)
// The harness closes the detector's stdin to end the session.
inline constexpr std::string_view kDetectorProtocol = "streamscene-detector/1";
inline constexpr std::uint32_t kMaxFrameBytes = 1u << 30;

struct DetectionRequest {
  std::vector<std::string> categories;
  MemoryData memory;
};

std::string encode_frame(std::string_view payload);
std::string encode_hello();
std::string encode_detection_request(const MemorySnapshot& memory,
                                     const CategoryVocabulary& categories);

// Parses a harness->detector payload. Returns false for a handshake (and
// leaves `out` untouched); throws ProtocolError for malformed payloads.
bool decode_request(std::string_view payload, DetectionRequest& out);

// Blocking frame I/O on file descriptors. read_frame returns false on clean
// EOF before any byte of a frame; throws ProtocolError on timeout or a
// truncated frame.
bool read_frame(int fd, std::string& payload, std::chrono::milliseconds timeout);
void write_frame(int fd, std::string_view payload);

// Runs an external command (via /bin/sh -c) and talks the protocol over its
// stdin/stdout. One request per call to detect(). Every exchange is appended
// to transcript(); failures throw ProtocolError carrying that transcript.
class ProcessDetector : public Detector {
 public:
  explicit ProcessDetector(std::string command,
                           std::chrono::milliseconds timeout = std::chrono::seconds(60));
  ~ProcessDetector() override;
  ProcessDetector(const ProcessDetector&) = delete;
  ProcessDetector& operator=(const ProcessDetector&) = delete;

  std::string detect(const MemorySnapshot& memory, const CategoryVocabulary& categories) override;
  const std::vector<std::string>& transcript() const { return transcript_; }

 private:
  [[noreturn]] void fail(const std::string& what);
  void shutdown();

  std::string command_;
  std::chrono::milliseconds timeout_;
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::size_t requests_ = 0;
  std::vector<std::string> transcript_;
};

// Serves `detector` over the protocol on the given descriptors until EOF.
// Returns 0 on clean shutdown, 2 on a protocol violation.
int serve_detector(Detector& detector, int in_fd, int out_fd);

}  // namespace streamscene
