#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dswarm/core.hpp"

namespace dswarm {

// --- datasets: JSON Lines ---------------------------------------------------
//
// {"id": str, "query": str, "answer": str|null, "features": [number]|null, "meta": {str: str}}

std::string to_json_line(const EvalInstance& instance);

/// Throws Parse(line) naming the offending field.
EvalInstance from_json_line(std::string_view line, std::size_t line_number);

void write_dataset(const std::filesystem::path& path, const Dataset& data);

/// Blank lines are skipped; a file with no records throws EmptyDataset.
Dataset read_dataset(const std::filesystem::path& path);

// --- checkpoints ------------------------------------------------------------
//
// Little-endian:
//   "DSWM" | u16 version | u32 dim | u32 particle count
//   per particle: f64[dim] position, f64[dim] velocity, f64[dim] personal best, f64 score
//   f64[dim] global best, f64 score, f64[dim] global worst, f64 score
//   u32 iteration, u32 stagnation
// Unset global vectors are written as zeros with their infinite score and
// come back empty.

inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(const SwarmState& swarm);

/// Throws BadMagic, VersionUnsupported or TruncatedFile(byte offset).
SwarmState decode_checkpoint(std::span<const std::uint8_t> bytes);

struct CheckpointMeta {
    std::string config_hash;
    std::uint64_t seed = 0;
    std::string kind;  // "optimize" or "adversarial-data" / "adversarial-model"

    friend bool operator==(const CheckpointMeta&, const CheckpointMeta&) = default;
};

/// Writes the binary file and the `{path}.meta.json` sidecar.
void write_checkpoint(const std::filesystem::path& path, const SwarmState& swarm, const CheckpointMeta& meta);
SwarmState read_checkpoint(const std::filesystem::path& path);
CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path);

// --- misc -------------------------------------------------------------------

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

/// 64-bit FNV-1a of the text, as 16 hex digits.
std::string fnv1a_hex(std::string_view text);

/// Exclusive lock on an output directory, released on destruction.
class DirectoryLock {
public:
    explicit DirectoryLock(const std::filesystem::path& dir);
    ~DirectoryLock();
    DirectoryLock(const DirectoryLock&) = delete;
    DirectoryLock& operator=(const DirectoryLock&) = delete;

private:
    std::filesystem::path path_;
};

}  // namespace dswarm
