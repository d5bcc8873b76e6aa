#pragma once

#include <atomic>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smtpguard::cli {

/// Returns the password typed by the user, or nullopt on end of input.
using PasswordPrompt = std::function<std::optional<std::string>(std::string_view prompt)>;

struct Io {
  std::ostream& out;
  std::ostream& err;
  PasswordPrompt password;
  /// serve polls this; nullptr means run until the process is killed.
  const std::atomic<bool>* stop = nullptr;
};

/// Full command line, without the program name. Returns the exit code:
/// 0 success, 1 domain verdict failure, 2 usage or runtime error.
int run(const std::vector<std::string>& args, Io io);

} // namespace smtpguard::cli
