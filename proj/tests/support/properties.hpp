#pragma once

// Randomized property drivers shared by the unit tests and the acceptance
// runner.

#include <cstdint>
#include <string>

namespace smtpguard::props {

struct WalkStats {
  int walks = 0;
  long steps = 0;
  long enqueued = 0;
  long violations = 0;
  std::string first_violation;
};

/// Random command walks against both policies. A violation is an
/// EnqueueMessage without an accepted MAIL and RCPT in the same
/// transaction, or, in AuthRequired mode, without an earlier 235 reply.
WalkStats random_walk_soundness(std::uint64_t seed, int walks, int max_length);

struct DryRunStats {
  int runs = 0;
  int vulnerable = 0;
  int secured = 0;
  int indeterminate = 0;
  int runs_with_data = 0; // transcripts containing a client DATA line
};

/// Dry-run probes (send_message=false) against real sessions with random
/// policies and against a server answering with random reply codes.
DryRunStats dry_run_safety(std::uint64_t seed, int runs);

} // namespace smtpguard::props
