#include "otonav/net/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>

#include "otonav/random.hpp"

namespace otonav::net {
namespace fs = std::filesystem;

namespace {

constexpr char kMagic[8] = {'O', 'T', 'O', 'N', 'A', 'V', 'C', 'K'};

template <typename U>
void put(std::ostream& out, U v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_matrix(std::ostream& out, const Matrix<float>& m) {
  out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
}

template <typename U>
U get(std::istream& in) {
  U v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated checkpoint");
  return v;
}

std::string get_string(std::istream& in, std::uint64_t limit) {
  const auto n = get<std::uint64_t>(in);
  if (n > limit) throw CheckpointError("corrupt checkpoint string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw CheckpointError("truncated checkpoint");
  return s;
}

void get_matrix(std::istream& in, Matrix<float>& m) {
  in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  if (!in) throw CheckpointError("truncated checkpoint");
}

}  // namespace

std::string config_digest(const Json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

void save_checkpoint(const fs::path& path, const Json& config, const ModelParams<float>& params) {
  const fs::path tmp = path.string() + ".tmp";
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot open " + tmp.string() + " for writing");
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, kCheckpointVersion);
    put_string(out, config.dump());
    put_string(out, config_digest(config));
    put<std::int64_t>(out, params.step);
    put<std::uint64_t>(out, params.size());
    for (const auto& b : params.blocks()) {
      put_string(out, b.name);
      put<std::int64_t>(out, b.value.rows());
      put<std::int64_t>(out, b.value.cols());
      put_matrix(out, b.value);
      put_matrix(out, b.m);
      put_matrix(out, b.v);
    }
    out.flush();
    if (!out) throw CheckpointError("write failed for " + tmp.string());
    out.close();
    fs::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    fs::remove(tmp, ec);
    throw;
  }
}

Checkpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open " + path.string());
  char magic[sizeof kMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw CheckpointError(path.string() + ": not a checkpoint");
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ck;
  const std::string cfg = get_string(in, 1u << 24);
  try {
    ck.config = Json::parse(cfg);
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("checkpoint config: ") + e.what());
  }
  if (get_string(in, 64) != config_digest(ck.config)) throw CheckpointError("checkpoint config digest mismatch");
  ck.params.step = get<std::int64_t>(in);
  const auto count = get<std::uint64_t>(in);
  if (count > 100000) throw CheckpointError("corrupt checkpoint block count");
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = get_string(in, 4096);
    const auto rows = get<std::int64_t>(in);
    const auto cols = get<std::int64_t>(in);
    if (rows <= 0 || cols <= 0 || rows * cols > (std::int64_t{1} << 28)) throw CheckpointError("corrupt block shape");
    const std::size_t i = ck.params.add(std::move(name), rows, cols);
    get_matrix(in, ck.params[i].value);
    get_matrix(in, ck.params[i].m);
    get_matrix(in, ck.params[i].v);
  }
  return ck;
}

}  // namespace otonav::net
