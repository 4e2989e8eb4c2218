#include "shmm/errors.hpp"
#include "shmm/simulate.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

namespace shmm {

namespace {

static_assert(std::endian::native == std::endian::little,
              "batch files are written in host order, which must be little endian");

constexpr std::array<char, 4> kMagic{'S', 'H', 'M', 'M'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::filesystem::path& path) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw InputError("truncated batch file " + path.string());
  return v;
}

void check_uniform(const SimulationBatch& batch) {
  if (batch.series.empty()) throw InputError("empty simulation batch");
  const std::size_t n = batch.series.front().size();
  for (const auto& s : batch.series) {
    if (s.size() != n) throw InputError("batch members differ in length");
  }
}

}  // namespace

void write_batch_binary(const std::filesystem::path& path,
                        const SimulationBatch& batch) {
  check_uniform(batch);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  const auto& first = batch.series.front();
  out.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.series.size()));
  put<std::uint64_t>(out, first.size());
  put<std::uint32_t>(out, static_cast<std::uint32_t>(batch.T));
  put<std::uint32_t>(out, first.empty() ? 1u
                                        : static_cast<std::uint32_t>(first.day_of_year[0]));
  put<std::uint64_t>(out, batch.seed);
  for (const auto& s : batch.series) {
    out.write(reinterpret_cast<const char*>(s.values.data()),
              static_cast<std::streamsize>(s.values.size() * sizeof(double)));
  }
  if (!out) throw InputError("failed writing " + path.string());
}

SimulationBatch read_batch_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::array<char, 4> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw InputError(path.string() + " is not a batch file");
  const auto version = get<std::uint32_t>(in, path);
  if (version != kVersion) {
    throw InputError("unsupported batch version " + std::to_string(version));
  }
  const auto count = get<std::uint32_t>(in, path);
  const auto n = get<std::uint64_t>(in, path);
  const auto T = get<std::uint32_t>(in, path);
  const auto first_day = get<std::uint32_t>(in, path);
  SimulationBatch batch;
  batch.seed = get<std::uint64_t>(in, path);
  batch.T = static_cast<int>(T);
  if (T == 0 || first_day < 1 || first_day > T) {
    throw InputError("invalid calendar in batch header");
  }
  batch.series.resize(count);
  for (auto& s : batch.series) {
    s.values.resize(n);
    in.read(reinterpret_cast<char*>(s.values.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw InputError("truncated batch file " + path.string());
    s.day_of_year.resize(n);
    for (std::uint64_t t = 0; t < n; ++t) {
      s.day_of_year[t] = reduce_day(static_cast<long long>(first_day + t), batch.T);
    }
  }
  return batch;
}

void write_batch_csv(const std::filesystem::path& path,
                     const SimulationBatch& batch) {
  check_uniform(batch);
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out << "# seed=" << batch.seed << " T=" << batch.T << "\n";
  out << "member,index,day_of_year,value\n";
  std::array<char, 32> buf{};
  for (std::size_t i = 0; i < batch.series.size(); ++i) {
    const auto& s = batch.series[i];
    for (std::size_t t = 0; t < s.size(); ++t) {
      const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), s.values[t]);
      out << i << ',' << t + 1 << ',' << s.day_of_year[t] << ','
          << std::string_view(buf.data(), static_cast<std::size_t>(res.ptr - buf.data()))
          << '\n';
    }
  }
  if (!out) throw InputError("failed writing " + path.string());
}

SimulationBatch read_batch_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  SimulationBatch batch;
  std::string line;
  std::size_t lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::istringstream meta(line.substr(1));
      std::string tok;
      while (meta >> tok) {
        if (tok.rfind("seed=", 0) == 0) batch.seed = std::stoull(tok.substr(5));
        if (tok.rfind("T=", 0) == 0) batch.T = std::stoi(tok.substr(2));
      }
      continue;
    }
    if (!header_seen) {
      if (line != "member,index,day_of_year,value") {
        throw InputError("unexpected batch header", lineno);
      }
      header_seen = true;
      continue;
    }
    std::size_t member = 0, index = 0;
    int doy = 0;
    double value = 0.0;
    const char* p = line.data();
    const char* end = line.data() + line.size();
    auto field = [&](auto& dst) {
      auto r = std::from_chars(p, end, dst);
      if (r.ec != std::errc{}) throw InputError("malformed batch row", lineno);
      p = r.ptr;
      if (p < end && *p == ',') ++p;
    };
    field(member);
    field(index);
    field(doy);
    field(value);
    if (p != end) throw InputError("malformed batch row", lineno);
    if (member > batch.series.size()) throw InputError("members out of order", lineno);
    if (member == batch.series.size()) batch.series.emplace_back();
    auto& s = batch.series[member];
    if (index != s.size() + 1) throw InputError("indices out of order", lineno);
    s.values.push_back(value);
    s.day_of_year.push_back(doy);
  }
  if (batch.series.empty()) throw InputError("empty batch file " + path.string());
  return batch;
}

SimulationBatch read_batch(const std::filesystem::path& path) {
  if (path.extension() == ".bin") return read_batch_binary(path);
  return read_batch_csv(path);
}

}  // namespace shmm
