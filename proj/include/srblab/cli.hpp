#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace srblab {

inline constexpr const char* kArtifactVersion = "1.0.0";

// Exit codes of parse_and_dispatch.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitPrecondition = 2;
inline constexpr int kExitInvariant = 3;
inline constexpr int kExitUsage = 64;

// Flat key=value record written next to every output set. The last line carries the
// SHA-256 of everything above it.
struct RunManifest {
    std::string version = kArtifactVersion;
    std::string subcommand;  // words joined by spaces, e.g. "srb run"
    std::uint64_t seed = 1;
    std::string threads = "auto";
    std::map<std::string, std::string> flags;
    std::map<std::string, std::string> inputs;   // path -> digest
    std::map<std::string, std::string> outputs;  // file name -> digest
    std::vector<std::pair<std::string, double>> timings_ms;

    std::string serialize() const;
    // Refuses (PreconditionError) a missing or wrong digest line or a malformed entry.
    static RunManifest parse(const std::string& text);
};

std::string sha256_hex(const std::string& bytes);
std::string file_sha256(const std::string& path);

// args excludes the program name.
int parse_and_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int parse_and_dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Re-runs the manifest's subcommand into out_dir and compares output digests.
// threads empty keeps the recorded worker count.
int replay(const std::string& manifest_path, const std::string& out_dir, const std::string& threads, std::ostream& out,
           std::ostream& err);

}  // namespace srblab
