#include "smtpguard/spool.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include <nlohmann/json.hpp>

#include "smtpguard/error.hpp"

namespace smtpguard {

namespace fs = std::filesystem;

namespace {

void write_durably(const fs::path& target, std::string_view content) {
  auto tmp = target.parent_path() / ("." + target.filename().string() + ".tmp");
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0640);
  if (fd < 0) {
    throw SpoolIoError("cannot create " + tmp.string() + ": " + std::strerror(errno));
  }
  std::string_view rest = content;
  while (!rest.empty()) {
    ssize_t n = ::write(fd, rest.data(), rest.size());
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      int err = errno;
      ::close(fd);
      ::unlink(tmp.c_str());
      throw SpoolIoError("cannot write " + tmp.string() + ": " + std::strerror(err));
    }
    rest.remove_prefix(static_cast<std::size_t>(n));
  }
  if (::fsync(fd) != 0 || ::close(fd) != 0) {
    ::unlink(tmp.c_str());
    throw SpoolIoError("cannot flush " + tmp.string());
  }
  if (::rename(tmp.c_str(), target.c_str()) != 0) {
    int err = errno;
    ::unlink(tmp.c_str());
    throw SpoolIoError("cannot rename into " + target.string() + ": " +
                       std::strerror(err));
  }
}

void sync_directory(const fs::path& dir) {
  int fd = ::open(dir.c_str(), O_RDONLY | O_DIRECTORY | O_CLOEXEC);
  if (fd >= 0) {
    ::fsync(fd);
    ::close(fd);
  }
}

} // namespace

std::string format_rfc3339(std::chrono::system_clock::time_point t) {
  std::time_t secs = std::chrono::system_clock::to_time_t(t);
  std::tm tm{};
  ::gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::chrono::system_clock::time_point parse_rfc3339(const std::string& text) {
  std::tm tm{};
  std::istringstream in(text);
  in >> std::get_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  if (in.fail()) {
    throw InvalidArgument("not an RFC 3339 UTC timestamp: " + text);
  }
  return std::chrono::system_clock::from_time_t(::timegm(&tm));
}

nlohmann::json SpooledMessage::metadata() const {
  auto forward = nlohmann::json::array();
  for (const auto& a : envelope.forward_paths) {
    forward.push_back(a.str());
  }
  return {
      {"queue_id", queue_id.str()},
      {"received_at", format_rfc3339(received_at)},
      {"reverse_path", envelope.reverse_path.str()},
      {"forward_paths", forward},
      {"authenticated_as",
       authenticated_as ? nlohmann::json(*authenticated_as) : nlohmann::json(nullptr)},
  };
}

fs::path spool(const SpooledMessage& message, const fs::path& spool_dir) {
  std::error_code ec;
  if (!fs::is_directory(spool_dir, ec)) {
    throw SpoolIoError("spool directory does not exist: " + spool_dir.string());
  }
  if (message.envelope.forward_paths.empty()) {
    throw InvalidArgument("spooled message needs at least one recipient");
  }
  const auto eml = spool_dir / (message.queue_id.str() + ".eml");
  const auto meta = spool_dir / (message.queue_id.str() + ".json");
  write_durably(eml, message.raw_data);
  write_durably(meta, message.metadata().dump(2) + "\n");
  sync_directory(spool_dir);
  return eml;
}

SpooledMessage load_spooled(const fs::path& spool_dir, const QueueId& id) {
  std::ifstream meta_in(spool_dir / (id.str() + ".json"));
  std::ifstream eml_in(spool_dir / (id.str() + ".eml"), std::ios::binary);
  if (!meta_in || !eml_in) {
    throw SpoolIoError("spooled message " + id.str() + " not found");
  }
  auto meta = nlohmann::json::parse(meta_in);
  std::vector<Address> forward;
  for (const auto& a : meta.at("forward_paths")) {
    forward.push_back(Address::parse(a.get<std::string>()));
  }
  std::optional<std::string> user;
  if (!meta.at("authenticated_as").is_null()) {
    user = meta.at("authenticated_as").get<std::string>();
  }
  std::string raw{std::istreambuf_iterator<char>(eml_in), {}};
  return SpooledMessage{
      QueueId::parse(meta.at("queue_id").get<std::string>()),
      parse_rfc3339(meta.at("received_at").get<std::string>()),
      Envelope{Address::parse(meta.at("reverse_path").get<std::string>()),
               std::move(forward)},
      std::move(user), std::move(raw)};
}

void DirectorySpool::store(const SpooledMessage& message) {
  std::lock_guard guard(mutex_);
  spool(message, dir_);
}

void MemorySpool::store(const SpooledMessage& message) {
  std::lock_guard guard(mutex_);
  messages_.push_back(message);
}

std::vector<SpooledMessage> MemorySpool::messages() const {
  std::lock_guard guard(mutex_);
  return messages_;
}

} // namespace smtpguard
