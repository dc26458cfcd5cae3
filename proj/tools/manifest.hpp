#pragma once

// Run manifests: one JSON record per CLI invocation with the resolved
// configuration and SHA-256 digests of every file written.

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include <array>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace dicke::cli {

// File could not be read or written; maps to exit code 4.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("SHA-256 unavailable");
  std::array<char, 1 << 16> buf{};
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 0xf]);
  }
  return out;
}

struct OutputFile {
  std::string name;  // relative to the output directory
  std::string sha256;
  std::uintmax_t bytes = 0;
};

struct RunManifest {
  std::string command;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::string version;
  std::string started_utc;
  double duration_seconds = 0.0;
  std::string status = "ok";
  std::string error;
  std::vector<OutputFile> outputs;
  std::vector<OutputFile> inputs;
  nlohmann::json summary = nlohmann::json::object();

  [[nodiscard]] nlohmann::json to_json() const {
    auto files = [](const std::vector<OutputFile>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& f : v) a.push_back({{"file", f.name}, {"sha256", f.sha256}, {"bytes", f.bytes}});
      return a;
    };
    nlohmann::json j = {{"schema", "dicke-run-manifest/1"},
                        {"command", command},
                        {"config", config},
                        {"seed", seed},
                        {"version", version},
                        {"started_utc", started_utc},
                        {"duration_seconds", duration_seconds},
                        {"status", status},
                        {"outputs", files(outputs)},
                        {"inputs", files(inputs)},
                        {"summary", summary}};
    if (!error.empty()) j["error"] = error;
    return j;
  }
};

inline std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Writes named files into one directory and records their digests.
class OutputDir {
 public:
  explicit OutputDir(std::filesystem::path root) : root_(std::move(root)) {
    std::error_code ec;
    std::filesystem::create_directories(root_, ec);
    if (ec || !std::filesystem::is_directory(root_))
      throw IoError("cannot create output directory " + root_.string() + (ec ? ": " + ec.message() : ""));
  }

  [[nodiscard]] const std::filesystem::path& root() const { return root_; }

  void write(const std::string& name, const std::function<void(std::ostream&)>& body) {
    const auto path = root_ / name;
    {
      std::ofstream out(path, std::ios::binary);
      if (!out) throw IoError("cannot open " + path.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw IoError("write failed for " + path.string());
    }
    files_.push_back({name, sha256_file(path), std::filesystem::file_size(path)});
  }

  void write_manifest(const RunManifest& m) const {
    const auto path = root_ / "manifest.json";
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << m.to_json().dump(2) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
  }

  [[nodiscard]] const std::vector<OutputFile>& files() const { return files_; }

 private:
  std::filesystem::path root_;
  std::vector<OutputFile> files_;
};

}  // namespace dicke::cli
