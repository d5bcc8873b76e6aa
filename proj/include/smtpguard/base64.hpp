#pragma once

#include <span>
#include <string>
#include <string_view>

namespace smtpguard {

/// Standard alphabet, '=' padded.
std::string encode_base64(std::span<const unsigned char> bytes);
std::string encode_base64(std::string_view bytes);

/// Throws ProtocolError(InvalidBase64) on characters outside the alphabet, a
/// length that is not a multiple of four, or misplaced padding.
std::string decode_base64(std::string_view text);

} // namespace smtpguard
