#pragma once

#include <cstdint>
#include <filesystem>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "otssl/errors.hpp"
#include "otssl/gnss/grid.hpp"
#include "otssl/gnss/signal.hpp"
#include "otssl/io.hpp"
#include "otssl/rng.hpp"

namespace otssl {

struct LabelledSample {
  IQPair image;
  int label = 0;            // 0 = clean, 1 = multipath
  bool is_labelled = true;  // false: label kept for evaluation bookkeeping only
};

// Labelled-first sample ordering: indices [0, n_sup) are labelled, the rest
// unlabelled. Pixel values are quantized to f32 precision at generation time
// so that the on-disk format round-trips bit-exactly.
struct Dataset {
  std::vector<LabelledSample> samples;
  std::size_t n_sup = 0;
  std::size_t n_unsup = 0;
  std::uint64_t seed = 0;
  GridSpec grid;
  double cn0_dbhz = 0.0;

  std::size_t size() const { return samples.size(); }

  void validate() const {
    if (n_sup + n_unsup != samples.size())
      throw config_error("Dataset: n_sup + n_unsup must equal sample count");
    for (std::size_t i = 0; i < samples.size(); ++i) {
      if (samples[i].is_labelled != (i < n_sup))
        throw config_error("Dataset: labelled samples must occupy the leading indices");
      if (samples[i].label != 0 && samples[i].label != 1)
        throw config_error("Dataset: labels must be 0 or 1");
    }
  }
};

inline LabelledSample generate_sample(const GridSpec& grid, bool contaminated, double cn0_dbhz,
                                      Rng& rng,
                                      const MultipathDistribution& dist = MultipathDistribution{}) {
  IQPair clean = render_component(grid, 1.0, 0.0, 0.0, 0.0);
  if (contaminated) {
    const MultipathParams p = dist.sample(rng);
    clean = add_images(clean, render_component(grid, p.amplitude_ratio, p.delay_offset_chips,
                                               p.doppler_offset_hz, p.phase_offset_rad));
  }
  LabelledSample s;
  s.image = add_noise(clean, cn0_dbhz, rng);
  s.label = contaminated ? 1 : 0;
  return s;
}

namespace detail {

// Alternating label layout. `zeros` of the block's labels are 0; the block
// starts with the majority class so any odd remainder lands at the end.
inline std::vector<int> block_labels(std::size_t count, std::size_t zeros) {
  const std::size_t ones = count - zeros;
  std::vector<int> labels;
  labels.reserve(count);
  int turn = zeros >= ones ? 0 : 1;
  std::size_t left[2] = {zeros, ones};
  for (std::size_t i = 0; i < count; ++i) {
    if (left[turn] == 0) turn = 1 - turn;
    labels.push_back(turn);
    --left[turn];
    turn = 1 - turn;
  }
  return labels;
}

inline void quantize_to_f32(IQPair& image) {
  for (double& v : image.i_channel.values()) v = static_cast<double>(static_cast<float>(v));
  for (double& v : image.q_channel.values()) v = static_cast<double>(static_cast<float>(v));
}

}  // namespace detail

// Builds the balanced train/validation pair. Every sample draws from its own
// index-derived stream, so generation order (or parallelism) cannot change
// the result.
inline std::pair<Dataset, Dataset> generate_dataset(
    const GridSpec& grid, std::size_t n_train, std::size_t n_sup, std::size_t n_val,
    double cn0_dbhz, std::uint64_t seed,
    const MultipathDistribution& dist = MultipathDistribution{}) {
  grid.validate();
  if (n_sup > n_train) throw config_error("generate_dataset: n_sup exceeds n_train");

  const auto build = [&](std::uint64_t subset_seed, std::size_t count, std::size_t labelled,
                         const std::vector<int>& labels) {
    Dataset ds;
    ds.n_sup = labelled;
    ds.n_unsup = count - labelled;
    ds.seed = subset_seed;
    ds.grid = grid;
    ds.cn0_dbhz = cn0_dbhz;
    ds.samples.reserve(count);
    for (std::size_t k = 0; k < count; ++k) {
      Rng rng(derive_seed(subset_seed, k));
      LabelledSample s = generate_sample(grid, labels[k] == 1, cn0_dbhz, rng, dist);
      detail::quantize_to_f32(s.image);
      s.is_labelled = k < labelled;
      ds.samples.push_back(std::move(s));
    }
    return ds;
  };

  // Class balance must hold in the labelled subset, the unlabelled subset,
  // and overall; ceil(count/2) zeros per block makes all three work out.
  const std::size_t total_zeros = (n_train + 1) / 2;
  const std::size_t lab_zeros = (n_sup + 1) / 2;
  std::vector<int> train_labels = detail::block_labels(n_sup, lab_zeros);
  const std::vector<int> unsup = detail::block_labels(n_train - n_sup, total_zeros - lab_zeros);
  train_labels.insert(train_labels.end(), unsup.begin(), unsup.end());
  const std::vector<int> val_labels = detail::block_labels(n_val, (n_val + 1) / 2);

  Dataset train = build(derive_seed(seed, 1), n_train, n_sup, train_labels);
  Dataset val = build(derive_seed(seed, 2), n_val, n_val, val_labels);
  return {std::move(train), std::move(val)};
}

namespace detail {

inline std::vector<float> dataset_pixels_f32(const Dataset& ds) {
  std::vector<float> pixels;
  pixels.reserve(ds.size() * 2 * ds.grid.pixels());
  for (const auto& s : ds.samples) {
    for (double v : s.image.i_channel.values()) pixels.push_back(static_cast<float>(v));
    for (double v : s.image.q_channel.values()) pixels.push_back(static_cast<float>(v));
  }
  return pixels;
}

inline std::string dataset_labels_csv(const Dataset& ds) {
  std::ostringstream out;
  out << "index,label,is_labelled\n";
  for (std::size_t i = 0; i < ds.size(); ++i)
    out << i << ',' << ds.samples[i].label << ',' << (ds.samples[i].is_labelled ? 1 : 0) << '\n';
  return out.str();
}

}  // namespace detail

// Content fingerprint over the serialized pixel and label bytes.
inline std::string dataset_hash(const Dataset& ds) {
  const auto pixels = detail::dataset_pixels_f32(ds);
  std::uint64_t h = fnv1a64(pixels.data(), pixels.size() * sizeof(float));
  h = fnv1a64(detail::dataset_labels_csv(ds), h);
  return hex64(h);
}

// Directory layout: meta.json + data.f32 (per sample: I row-major then Q
// row-major, little-endian) + labels.csv.
inline void save_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  ds.validate();
  std::filesystem::create_directories(dir);
  nlohmann::json meta{
      {"format_version", 1},
      {"generator_version", kGeneratorVersion},
      {"grid",
       {{"height", ds.grid.height},
        {"width", ds.grid.width},
        {"delay_span_chips", ds.grid.delay_span_chips},
        {"doppler_span_hz", ds.grid.doppler_span_hz}}},
      {"n_samples", ds.size()},
      {"n_sup", ds.n_sup},
      {"n_unsup", ds.n_unsup},
      {"cn0_dbhz", ds.cn0_dbhz},
      {"seed", ds.seed},
  };
  write_text_file(dir / "meta.json", meta.dump(2) + "\n");
  const auto pixels = detail::dataset_pixels_f32(ds);
  write_flat<float>(dir / "data.f32", pixels);
  write_text_file(dir / "labels.csv", detail::dataset_labels_csv(ds));
}

inline Dataset load_dataset(const std::filesystem::path& dir) {
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(read_text_file(dir / "meta.json"));
  } catch (const nlohmann::json::exception& e) {
    throw io_error("malformed meta.json in " + dir.string() + ": " + e.what());
  }

  Dataset ds;
  ds.grid.height = meta.at("grid").at("height").get<std::size_t>();
  ds.grid.width = meta.at("grid").at("width").get<std::size_t>();
  ds.grid.delay_span_chips = meta.at("grid").at("delay_span_chips").get<double>();
  ds.grid.doppler_span_hz = meta.at("grid").at("doppler_span_hz").get<double>();
  ds.grid.validate();
  ds.n_sup = meta.at("n_sup").get<std::size_t>();
  ds.n_unsup = meta.at("n_unsup").get<std::size_t>();
  ds.cn0_dbhz = meta.at("cn0_dbhz").get<double>();
  ds.seed = meta.at("seed").get<std::uint64_t>();
  const auto n_samples = meta.at("n_samples").get<std::size_t>();

  const auto pixels = read_flat<float>(dir / "data.f32");
  const std::size_t per_channel = ds.grid.pixels();
  if (pixels.size() != n_samples * 2 * per_channel)
    throw io_error("data.f32 size does not match meta.json in " + dir.string());

  std::istringstream labels(read_text_file(dir / "labels.csv"));
  std::string line;
  if (!std::getline(labels, line) || line != "index,label,is_labelled")
    throw io_error("labels.csv header mismatch in " + dir.string());

  ds.samples.resize(n_samples);
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < n_samples; ++i) {
    if (!std::getline(labels, line)) throw io_error("labels.csv truncated in " + dir.string());
    std::size_t index = 0;
    int label = 0, flagged = 0;
    char c1 = 0, c2 = 0;
    std::istringstream row(line);
    if (!(row >> index >> c1 >> label >> c2 >> flagged) || c1 != ',' || c2 != ',' || index != i)
      throw io_error("labels.csv row " + std::to_string(i) + " malformed in " + dir.string());
    auto& s = ds.samples[i];
    s.label = label;
    s.is_labelled = flagged != 0;
    s.image = IQPair(ds.grid);
    for (double& v : s.image.i_channel.values()) v = static_cast<double>(pixels[cursor++]);
    for (double& v : s.image.q_channel.values()) v = static_cast<double>(pixels[cursor++]);
  }
  ds.validate();
  return ds;
}

}  // namespace otssl
