#include "dmlkit/embedding_set.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <set>

#include "dmlkit/rng.hpp"

namespace dml {

namespace {

constexpr unsigned char kMagic[4] = {0x45, 0x4D, 0x42, 0x31};  // "EMB1"
constexpr std::uint16_t kVersion = 1;

void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <class T>
void write_le(std::ostream& os, T value) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<unsigned char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF);
  }
  write_bytes(os, buf, sizeof(T));
}

void read_bytes(std::istream& is, void* p, std::size_t n) {
  is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n) {
    throw Error(errc::truncated, "EMB1: unexpected end of file");
  }
}

template <class T>
T read_le(std::istream& is) {
  static_assert(std::is_integral_v<T>);
  unsigned char buf[sizeof(T)];
  read_bytes(is, buf, sizeof(T));
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

}  // namespace

std::uint32_t EmbeddingSet::num_classes() const {
  if (!class_names.empty()) return static_cast<std::uint32_t>(class_names.size());
  std::uint32_t max_label = 0;
  for (auto l : labels) max_label = std::max(max_label, l);
  return labels.empty() ? 0 : max_label + 1;
}

void EmbeddingSet::validate() const {
  if (rows() < 1 || dim() < 1) {
    throw Error(errc::shape_error, "EmbeddingSet: need N >= 1 and D >= 1");
  }
  if (static_cast<Eigen::Index>(labels.size()) != rows()) {
    throw Error(errc::shape_error, "EmbeddingSet: labels length must equal N");
  }
  if (!data.allFinite()) {
    throw Error(errc::non_finite, "EmbeddingSet: data contains non-finite entries");
  }
  if (!class_names.empty()) {
    for (auto l : labels) {
      if (l >= class_names.size()) {
        throw Error(errc::unknown_class, "EmbeddingSet: label exceeds class-name table",
                    static_cast<long>(l));
      }
    }
  }
}

ClassIndex ClassIndex::build(const EmbeddingSet& set) {
  std::map<std::uint32_t, std::vector<Eigen::Index>> groups;
  for (Eigen::Index i = 0; i < set.rows(); ++i) {
    groups[set.labels[static_cast<std::size_t>(i)]].push_back(i);
  }
  ClassIndex index;
  index.class_ids.reserve(groups.size());
  index.row_groups.reserve(groups.size());
  index.class_means.resize(static_cast<Eigen::Index>(groups.size()), set.dim());
  Eigen::Index c = 0;
  for (auto& [id, rows] : groups) {
    Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(set.dim());
    for (Eigen::Index r : rows) mean += set.data.row(r);
    mean /= static_cast<double>(rows.size());
    index.class_means.row(c) = mean;
    index.class_ids.push_back(id);
    index.row_groups.push_back(std::move(rows));
    ++c;
  }
  return index;
}

std::size_t ClassIndex::position_of(std::uint32_t class_id) const {
  auto it = std::lower_bound(class_ids.begin(), class_ids.end(), class_id);
  if (it == class_ids.end() || *it != class_id) {
    throw Error(errc::unknown_class, "unknown class id " + std::to_string(class_id),
                static_cast<long>(class_id));
  }
  return static_cast<std::size_t>(it - class_ids.begin());
}

void SynthSpec::validate() const {
  if (num_classes < 1 || samples_per_class < 1 || dim < 1) {
    throw Error(errc::invalid_argument, "SynthSpec: counts and dim must be >= 1");
  }
  if (!(within_class_std >= 0.0) || !(class_mean_scale >= 0.0)) {
    throw Error(errc::invalid_argument, "SynthSpec: scales must be non-negative");
  }
}

EmbeddingSet synth_gaussian_classes(const SynthSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const Eigen::Index n = static_cast<Eigen::Index>(spec.num_classes) * spec.samples_per_class;
  EmbeddingSet set;
  set.data.resize(n, spec.dim);
  set.labels.resize(static_cast<std::size_t>(n));

  Eigen::MatrixXd means(spec.num_classes, spec.dim);
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int d = 0; d < spec.dim; ++d) {
      means(c, d) = rng.uniform(-spec.class_mean_scale, spec.class_mean_scale);
    }
  }
  Eigen::Index row = 0;
  for (int c = 0; c < spec.num_classes; ++c) {
    for (int s = 0; s < spec.samples_per_class; ++s, ++row) {
      for (int d = 0; d < spec.dim; ++d) {
        set.data(row, d) = means(c, d) + spec.within_class_std * rng.gaussian();
      }
      set.labels[static_cast<std::size_t>(row)] = static_cast<std::uint32_t>(c);
    }
  }
  return set;
}

EmbeddingSet load_csv(const std::filesystem::path& path, bool has_header) {
  std::ifstream file(path);
  if (!file) {
    throw Error(errc::io_error, "cannot open " + path.string());
  }
  EmbeddingSet set;
  std::vector<double> values;
  std::string line;
  long line_no = 0;
  Eigen::Index dim = -1;
  std::vector<std::uint32_t> labels;

  auto trimmed = [](std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
  };

  while (std::getline(file, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (trimmed(line).empty()) continue;

    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      const auto pos = rest.find(',');
      fields.push_back(trimmed(rest.substr(0, pos)));
      if (pos == std::string_view::npos) break;
      rest.remove_prefix(pos + 1);
    }
    if (fields.size() < 2) {
      throw Error(errc::format_error, "line " + std::to_string(line_no) + ": need label and at least one value",
                  line_no);
    }
    const Eigen::Index row_dim = static_cast<Eigen::Index>(fields.size()) - 1;
    if (dim < 0) {
      dim = row_dim;
    } else if (row_dim != dim) {
      throw Error(errc::format_error, "line " + std::to_string(line_no) + ": expected " + std::to_string(dim) +
                                          " values, got " + std::to_string(row_dim),
                  line_no);
    }

    std::uint32_t label = 0;
    {
      const auto f = fields[0];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), label);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw Error(errc::format_error, "line " + std::to_string(line_no) + ": label is not a non-negative integer",
                    line_no);
      }
    }
    labels.push_back(label);
    for (std::size_t i = 1; i < fields.size(); ++i) {
      const auto f = fields[i];
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
      if (ec != std::errc{} || ptr != f.data() + f.size()) {
        throw Error(errc::format_error, "line " + std::to_string(line_no) + ": column " + std::to_string(i) +
                                            " is not a number",
                    line_no, static_cast<long>(i));
      }
      if (!std::isfinite(v)) {
        throw Error(errc::value_error, "line " + std::to_string(line_no) + ": column " + std::to_string(i) +
                                           " is not finite",
                    line_no, static_cast<long>(i));
      }
      values.push_back(v);
    }
  }
  if (labels.empty()) {
    throw Error(errc::empty_input, "CSV has no data rows: " + path.string());
  }
  const Eigen::Index n = static_cast<Eigen::Index>(labels.size());
  set.data.resize(n, dim);
  for (Eigen::Index r = 0; r < n; ++r) {
    for (Eigen::Index c = 0; c < dim; ++c) {
      set.data(r, c) = values[static_cast<std::size_t>(r * dim + c)];
    }
  }
  set.labels = std::move(labels);
  set.validate();
  return set;
}

void save_binary(const EmbeddingSet& set, const std::filesystem::path& path) {
  set.validate();
  std::ofstream file(path, std::ios::binary);
  if (!file) {
    throw Error(errc::io_error, "cannot open for writing: " + path.string());
  }
  write_bytes(file, kMagic, sizeof(kMagic));
  write_le<std::uint16_t>(file, kVersion);
  const std::uint8_t flags = set.class_names.empty() ? 0 : 1;
  write_le<std::uint8_t>(file, flags);
  write_le<std::uint8_t>(file, 0);  // reserved
  write_le<std::uint64_t>(file, static_cast<std::uint64_t>(set.rows()));
  write_le<std::uint32_t>(file, static_cast<std::uint32_t>(set.dim()));
  for (Eigen::Index r = 0; r < set.rows(); ++r) {
    for (Eigen::Index c = 0; c < set.dim(); ++c) {
      const float f = static_cast<float>(set.data(r, c));
      write_le<std::uint32_t>(file, std::bit_cast<std::uint32_t>(f));
    }
  }
  for (auto l : set.labels) write_le<std::uint32_t>(file, l);
  if (flags & 1) {
    write_le<std::uint32_t>(file, static_cast<std::uint32_t>(set.class_names.size()));
    for (const auto& name : set.class_names) {
      if (name.size() > UINT16_MAX) {
        throw Error(errc::invalid_argument, "class name longer than 65535 bytes");
      }
      write_le<std::uint16_t>(file, static_cast<std::uint16_t>(name.size()));
      write_bytes(file, name.data(), name.size());
    }
  }
  if (!file) {
    throw Error(errc::io_error, "write failed: " + path.string());
  }
}

EmbeddingSet load_binary(const std::filesystem::path& path) {
  std::ifstream file(path, std::ios::binary);
  if (!file) {
    throw Error(errc::io_error, "cannot open " + path.string());
  }
  unsigned char magic[4];
  file.read(reinterpret_cast<char*>(magic), 4);
  if (file.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(errc::format_error, "not an EMB1 file: " + path.string());
  }
  const auto version = read_le<std::uint16_t>(file);
  if (version != kVersion) {
    throw Error(errc::version_mismatch, "unsupported EMB1 version " + std::to_string(version));
  }
  const auto flags = read_le<std::uint8_t>(file);
  (void)read_le<std::uint8_t>(file);  // reserved
  const auto n = read_le<std::uint64_t>(file);
  const auto d = read_le<std::uint32_t>(file);
  if (n < 1 || d < 1) {
    throw Error(errc::format_error, "EMB1: empty matrix header");
  }

  EmbeddingSet set;
  set.data.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
  for (std::uint64_t r = 0; r < n; ++r) {
    for (std::uint32_t c = 0; c < d; ++c) {
      const auto bits = read_le<std::uint32_t>(file);
      set.data(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          static_cast<double>(std::bit_cast<float>(bits));
    }
  }
  set.labels.resize(n);
  for (std::uint64_t r = 0; r < n; ++r) set.labels[r] = read_le<std::uint32_t>(file);
  if (flags & 1) {
    const auto count = read_le<std::uint32_t>(file);
    set.class_names.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
      const auto len = read_le<std::uint16_t>(file);
      std::string name(len, '\0');
      if (len > 0) read_bytes(file, name.data(), len);
      set.class_names[i] = std::move(name);
    }
  }
  set.validate();
  return set;
}

EmbeddingSet l2_normalize(const EmbeddingSet& set) {
  EmbeddingSet out = set;
  for (Eigen::Index r = 0; r < set.rows(); ++r) {
    const double norm = set.data.row(r).norm();
    if (norm <= 1e-12) {
      throw Error(errc::degenerate_row, "row " + std::to_string(r) + " has (near-)zero norm", r);
    }
    out.data.row(r) /= norm;
  }
  return out;
}

std::pair<EmbeddingSet, EmbeddingSet> split_by_classes(
    const EmbeddingSet& set, const std::vector<std::uint32_t>& train_classes) {
  std::set<std::uint32_t> present(set.labels.begin(), set.labels.end());
  std::set<std::uint32_t> train(train_classes.begin(), train_classes.end());
  for (auto c : train) {
    if (!present.count(c)) {
      throw Error(errc::unknown_class, "class " + std::to_string(c) + " not present in set",
                  static_cast<long>(c));
    }
  }
  if (train.empty() || train.size() == present.size()) {
    throw Error(errc::empty_split, "train classes must be a nonempty proper subset");
  }

  std::vector<Eigen::Index> first_rows, second_rows;
  for (Eigen::Index r = 0; r < set.rows(); ++r) {
    (train.count(set.labels[static_cast<std::size_t>(r)]) ? first_rows : second_rows).push_back(r);
  }
  auto take = [&set](const std::vector<Eigen::Index>& rows) {
    EmbeddingSet out;
    out.data.resize(static_cast<Eigen::Index>(rows.size()), set.dim());
    out.labels.resize(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.data.row(static_cast<Eigen::Index>(i)) = set.data.row(rows[i]);
      out.labels[i] = set.labels[static_cast<std::size_t>(rows[i])];
    }
    out.class_names = set.class_names;
    return out;
  };
  return {take(first_rows), take(second_rows)};
}

}  // namespace dml
