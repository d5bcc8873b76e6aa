#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include <nlohmann/json_fwd.hpp>

namespace smtpguard {

/// Username -> salted SHA-256 digest. Read-only once a server is running.
///
/// File format (JSON): {"user": {"salt": "<32 hex>", "digest": "<64 hex>"}}
/// where digest = SHA-256(salt bytes || password bytes).
class CredentialStore {
public:
  struct Entry {
    std::string salt_hex;
    std::string digest_hex;
    bool operator==(const Entry&) const = default;
  };

  /// Adds or replaces a user with a fresh 16-byte random salt. Throws
  /// InvalidArgument for an empty username or one containing ':'.
  void set_password(std::string_view username, std::string_view password);
  void set_password(std::string_view username, std::string_view password,
                    std::span<const unsigned char, 16> salt);

  bool contains(std::string_view username) const;
  bool verify(std::string_view username, std::string_view password) const;

  const std::map<std::string, Entry, std::less<>>& entries() const noexcept {
    return entries_;
  }
  std::size_t size() const noexcept { return entries_.size(); }

  nlohmann::json to_json() const;
  static CredentialStore from_json(const nlohmann::json& j);

  /// Missing file yields an empty store. Throws std::runtime_error on
  /// unreadable or malformed files.
  static CredentialStore load(const std::filesystem::path& file);
  void save(const std::filesystem::path& file) const;

  bool operator==(const CredentialStore&) const = default;

private:
  std::map<std::string, Entry, std::less<>> entries_;
};

/// True iff SHA-256(salt || password) matches the stored digest. Unknown
/// users still cost one digest computation so timing does not reveal them.
bool verify_credentials(const CredentialStore& store, std::string_view username,
                        std::string_view password);

std::string sha256_hex(std::string_view bytes);

} // namespace smtpguard
