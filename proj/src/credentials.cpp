#include "smtpguard/credentials.hpp"

#include <array>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>
#include <openssl/crypto.h>
#include <openssl/evp.h>
#include <openssl/rand.h>

#include "smtpguard/error.hpp"

namespace smtpguard {

namespace {

std::string to_hex(std::span<const unsigned char> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  out.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    out += digits[b >> 4];
    out += digits[b & 0xf];
  }
  return out;
}

std::string from_hex(std::string_view hex) {
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  if (hex.size() % 2 != 0) {
    throw InvalidArgument("odd-length hex string");
  }
  std::string out;
  for (std::size_t i = 0; i < hex.size(); i += 2) {
    int hi = nibble(hex[i]);
    int lo = nibble(hex[i + 1]);
    if (hi < 0 || lo < 0) {
      throw InvalidArgument("invalid hex digit");
    }
    out += static_cast<char>((hi << 4) | lo);
  }
  return out;
}

std::string salted_digest_hex(std::string_view salt, std::string_view password) {
  std::string input;
  input.reserve(salt.size() + password.size());
  input += salt;
  input += password;
  return sha256_hex(input);
}

void check_username(std::string_view username) {
  if (username.empty()) {
    throw InvalidArgument("username must not be empty");
  }
  if (username.find(':') != std::string_view::npos) {
    throw InvalidArgument("username must not contain ':'");
  }
}

// Salt/digest used for unknown users so the work done is the same shape.
const CredentialStore::Entry& decoy_entry() {
  static const CredentialStore::Entry entry{
      std::string(32, '0'), salted_digest_hex(std::string(16, '\0'), "")};
  return entry;
}

} // namespace

std::string sha256_hex(std::string_view bytes) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md.data(), &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("SHA-256 computation failed");
  }
  return to_hex(std::span<const unsigned char>(md.data(), len));
}

void CredentialStore::set_password(std::string_view username,
                                   std::string_view password) {
  std::array<unsigned char, 16> salt{};
  if (RAND_bytes(salt.data(), static_cast<int>(salt.size())) != 1) {
    throw std::runtime_error("random salt generation failed");
  }
  set_password(username, password, salt);
}

void CredentialStore::set_password(std::string_view username,
                                   std::string_view password,
                                   std::span<const unsigned char, 16> salt) {
  check_username(username);
  const std::string salt_bytes(reinterpret_cast<const char*>(salt.data()),
                               salt.size());
  entries_.insert_or_assign(std::string(username),
                            Entry{to_hex(salt), salted_digest_hex(salt_bytes, password)});
}

bool CredentialStore::contains(std::string_view username) const {
  return entries_.find(username) != entries_.end();
}

bool CredentialStore::verify(std::string_view username,
                             std::string_view password) const {
  auto it = entries_.find(username);
  const bool known = it != entries_.end();
  const Entry& entry = known ? it->second : decoy_entry();

  std::string computed;
  try {
    computed = salted_digest_hex(from_hex(entry.salt_hex), password);
  } catch (const InvalidArgument&) {
    return false;
  }
  const bool match =
      computed.size() == entry.digest_hex.size() &&
      CRYPTO_memcmp(computed.data(), entry.digest_hex.data(), computed.size()) == 0;
  return known && match;
}

bool verify_credentials(const CredentialStore& store, std::string_view username,
                        std::string_view password) {
  return store.verify(username, password);
}

nlohmann::json CredentialStore::to_json() const {
  auto j = nlohmann::json::object();
  for (const auto& [name, entry] : entries_) {
    j[name] = {{"salt", entry.salt_hex}, {"digest", entry.digest_hex}};
  }
  return j;
}

CredentialStore CredentialStore::from_json(const nlohmann::json& j) {
  if (!j.is_object()) {
    throw InvalidArgument("credentials must be a JSON object");
  }
  CredentialStore store;
  for (const auto& [name, value] : j.items()) {
    check_username(name);
    Entry entry{value.at("salt").get<std::string>(),
                value.at("digest").get<std::string>()};
    if (from_hex(entry.salt_hex).size() != 16 ||
        from_hex(entry.digest_hex).size() != 32) {
      throw InvalidArgument("bad salt or digest length for user " + name);
    }
    store.entries_.emplace(name, std::move(entry));
  }
  return store;
}

CredentialStore CredentialStore::load(const std::filesystem::path& file) {
  std::error_code ec;
  if (!std::filesystem::exists(file, ec)) {
    return {};
  }
  std::ifstream in(file);
  if (!in) {
    throw std::runtime_error("cannot read credentials file " + file.string());
  }
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("malformed credentials file " + file.string() +
                             ": " + e.what());
  }
}

void CredentialStore::save(const std::filesystem::path& file) const {
  auto tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << to_json().dump(2) << '\n';
    if (!out.flush()) {
      throw std::runtime_error("cannot write credentials file " + tmp.string());
    }
  }
  std::filesystem::rename(tmp, file);
}

} // namespace smtpguard
