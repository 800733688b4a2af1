#include "dswarm/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include <fcntl.h>
#include <unistd.h>

#include <json.hpp>

namespace dswarm {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint codec assumes a little-endian host");

std::string to_json_line(const EvalInstance& instance) {
    json j;
    j["id"] = instance.id;
    j["query"] = instance.query;
    j["answer"] = instance.reference_answer ? json(*instance.reference_answer) : json(nullptr);
    if (instance.features) {
        const auto& f = *instance.features;
        j["features"] = std::vector<double>(f.data(), f.data() + f.size());
    } else {
        j["features"] = nullptr;
    }
    j["meta"] = json::object();
    for (const auto& [k, v] : instance.meta) j["meta"][k] = v;
    return j.dump();
}

EvalInstance from_json_line(std::string_view line, std::size_t line_number) {
    auto fail = [line_number](const std::string& what) -> Error {
        return Error(ErrorCode::Parse, "line " + std::to_string(line_number) + ": " + what, line_number);
    };
    json j;
    try {
        j = json::parse(line);
    } catch (const json::exception& e) {
        throw fail(std::string("invalid JSON (") + e.what() + ")");
    }
    if (!j.is_object()) throw fail("record is not an object");

    EvalInstance inst;
    if (!j.contains("id") || !j["id"].is_string()) throw fail("missing string field \"id\"");
    inst.id = j["id"].get<std::string>();
    if (!j.contains("query") || !j["query"].is_string()) throw fail("missing string field \"query\"");
    inst.query = j["query"].get<std::string>();

    if (j.contains("answer") && !j["answer"].is_null()) {
        if (!j["answer"].is_string()) throw fail("field \"answer\" must be a string or null");
        inst.reference_answer = j["answer"].get<std::string>();
    }
    if (j.contains("features") && !j["features"].is_null()) {
        const auto& f = j["features"];
        if (!f.is_array()) throw fail("field \"features\" must be an array or null");
        Eigen::VectorXd v(static_cast<Eigen::Index>(f.size()));
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (!f[i].is_number()) throw fail("field \"features\" has a non-numeric entry");
            v(static_cast<Eigen::Index>(i)) = f[i].get<double>();
        }
        inst.features = std::move(v);
    }
    if (j.contains("meta") && !j["meta"].is_null()) {
        if (!j["meta"].is_object()) throw fail("field \"meta\" must be an object");
        for (const auto& [k, v] : j["meta"].items()) inst.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    return inst;
}

void write_dataset(const std::filesystem::path& path, const Dataset& data) {
    std::string text;
    for (const auto& inst : data.instances) {
        text += to_json_line(inst);
        text += '\n';
    }
    write_text(path, text);
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    Dataset data;
    std::string line;
    for (std::size_t n = 1; std::getline(in, line); ++n) {
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        data.instances.push_back(from_json_line(line, n));
    }
    if (data.empty()) throw Error(ErrorCode::EmptyDataset, "'" + path.string() + "' holds no records");
    return data;
}

namespace {

class Writer {
public:
    template <typename T>
    void put(T v) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_vector(const ParamVector& v, Eigen::Index dim) {
        for (Eigen::Index i = 0; i < dim; ++i) put<double>(v.size() == 0 ? 0.0 : v(i));
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> b) : bytes_(b) {}

    template <typename T>
    T get() {
        if (offset_ + sizeof(T) > bytes_.size())
            throw Error(ErrorCode::TruncatedFile, "checkpoint ends at byte " + std::to_string(bytes_.size()) +
                                                      ", needed " + std::to_string(sizeof(T)) + " more at offset " +
                                                      std::to_string(offset_),
                        offset_);
        T v;
        std::memcpy(&v, bytes_.data() + offset_, sizeof(T));
        offset_ += sizeof(T);
        return v;
    }
    ParamVector get_vector(Eigen::Index dim) {
        ParamVector v(dim);
        for (Eigen::Index i = 0; i < dim; ++i) v(i) = get<double>();
        return v;
    }
    std::size_t offset() const { return offset_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t offset_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const SwarmState& swarm) {
    validate(swarm);
    const Eigen::Index dim = swarm.dim();
    if (swarm.particles.size() > std::numeric_limits<std::uint32_t>::max() ||
        dim > std::numeric_limits<std::uint32_t>::max())
        throw Error(ErrorCode::OutOfRange, "swarm too large for the checkpoint format");
    Writer w;
    for (char c : std::string_view("DSWM")) w.put<char>(c);
    w.put<std::uint16_t>(kCheckpointVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(swarm.particles.size()));
    for (const auto& p : swarm.particles) {
        w.put_vector(p.position, dim);
        w.put_vector(p.velocity, dim);
        w.put_vector(p.personal_best, dim);
        w.put<double>(p.personal_best_score);
    }
    w.put_vector(swarm.global_best, dim);
    w.put<double>(swarm.global_best_score);
    w.put_vector(swarm.global_worst, dim);
    w.put<double>(swarm.global_worst_score);
    w.put<std::uint32_t>(swarm.iteration);
    w.put<std::uint32_t>(swarm.stagnation);
    return std::move(w.bytes);
}

SwarmState decode_checkpoint(std::span<const std::uint8_t> bytes) {
    Reader r(bytes);
    char magic[4];
    for (auto& c : magic) c = r.get<char>();
    if (std::string_view(magic, 4) != "DSWM") throw Error(ErrorCode::BadMagic, "not a swarm checkpoint", 0);
    const auto version = r.get<std::uint16_t>();
    if (version != kCheckpointVersion)
        throw Error(ErrorCode::VersionUnsupported, "checkpoint version " + std::to_string(version), 4);
    const auto dim = static_cast<Eigen::Index>(r.get<std::uint32_t>());
    const auto count = r.get<std::uint32_t>();

    SwarmState s;
    s.particles.resize(count);
    for (auto& p : s.particles) {
        p.position = r.get_vector(dim);
        p.velocity = r.get_vector(dim);
        p.personal_best = r.get_vector(dim);
        p.personal_best_score = r.get<double>();
    }
    s.global_best = r.get_vector(dim);
    s.global_best_score = r.get<double>();
    s.global_worst = r.get_vector(dim);
    s.global_worst_score = r.get<double>();
    s.iteration = r.get<std::uint32_t>();
    s.stagnation = r.get<std::uint32_t>();
    if (s.global_best_score == -std::numeric_limits<double>::infinity()) s.global_best.resize(0);
    if (s.global_worst_score == std::numeric_limits<double>::infinity()) s.global_worst.resize(0);
    if (r.offset() != bytes.size())
        throw Error(ErrorCode::Parse, "trailing bytes after checkpoint at offset " + std::to_string(r.offset()), r.offset());
    return s;
}

void write_checkpoint(const std::filesystem::path& path, const SwarmState& swarm, const CheckpointMeta& meta) {
    write_bytes(path, encode_checkpoint(swarm));
    const json sidecar = {{"config_hash", meta.config_hash}, {"seed", meta.seed}, {"kind", meta.kind},
                          {"version", kCheckpointVersion}};
    write_text(path.string() + ".meta.json", sidecar.dump(2) + "\n");
}

SwarmState read_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_bytes(path)); }

CheckpointMeta read_checkpoint_meta(const std::filesystem::path& path) {
    const auto sidecar = std::filesystem::path(path.string() + ".meta.json");
    json j;
    try {
        j = json::parse(read_text(sidecar));
        return {j.at("config_hash").get<std::string>(), j.at("seed").get<std::uint64_t>(), j.value("kind", "")};
    } catch (const json::exception& e) {
        throw Error(ErrorCode::Parse, "'" + sidecar.string() + "': " + e.what());
    }
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open '" + path.string() + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::Io, "cannot write '" + path.string() + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "write to '" + path.string() + "' failed");
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string read_text(const std::filesystem::path& path) {
    const auto bytes = read_bytes(path);
    return {bytes.begin(), bytes.end()};
}

std::string fnv1a_hex(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) h = (h ^ c) * 0x100000001b3ULL;
    std::ostringstream os;
    os << std::hex;
    os.width(16);
    os.fill('0');
    os << h;
    return os.str();
}

DirectoryLock::DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".dswarm.lock") {
    const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0)
        throw Error(ErrorCode::Locked, "output directory '" + dir.string() + "' is in use (remove " + path_.string() +
                                           " if no run is active)");
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

DirectoryLock::~DirectoryLock() {
    std::error_code ec;
    std::filesystem::remove(path_, ec);
}

}  // namespace dswarm
