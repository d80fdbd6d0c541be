#include "affect/synthdata.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "affect/csv.hpp"

namespace affect {

namespace {

using Index = Eigen::Index;

constexpr std::size_t kLatentDim = kNumEmotions + kNumVa + kNumAus;

// Stream tags for derive_seed.
constexpr std::uint64_t kStreamMap = 1;
constexpr std::uint64_t kStreamSample = 2;
constexpr std::uint64_t kStreamCompound = 3;

enum class Split : std::uint64_t { kTrain = 0, kTest = 1, kFull = 2 };

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

struct Latent {
  Vector expression;  // 7 mixing weights
  double valence = 0.0;
  double arousal = 0.0;
  AuVector au{};
};

double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

std::pair<double, double> draw_va(const VaRegion& region, std::mt19937_64& rng) {
  std::normal_distribution<double> n01(0.0, 1.0);
  const double v = clamp_unit(region.valence + region.spread * n01(rng));
  const double a = clamp_unit(region.arousal + region.spread * n01(rng));
  return {v, a};
}

void draw_aus(const std::array<double, kNumAus>& weights, double background, AuVector& out,
              std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (std::size_t k = 0; k < kNumAus; ++k) {
    const double p = weights[k] > 0.0 ? weights[k] : background;
    out[k] = u01(rng) < p ? 1 : 0;
  }
}

std::vector<double> render(const Matrix& map, const GeneratorConfig& cfg, const Latent& z,
                           std::mt19937_64& rng) {
  Vector latent(static_cast<Index>(kLatentDim));
  latent.head(static_cast<Index>(kNumEmotions)) = cfg.emotion_scale * z.expression;
  latent[static_cast<Index>(kNumEmotions)] = cfg.va_scale * z.valence;
  latent[static_cast<Index>(kNumEmotions) + 1] = cfg.va_scale * z.arousal;
  for (std::size_t k = 0; k < kNumAus; ++k) {
    latent[static_cast<Index>(kNumEmotions + kNumVa + k)] = cfg.au_scale * z.au[k];
  }
  const Vector x = map * latent;
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> out(static_cast<std::size_t>(x.size()));
  for (Index i = 0; i < x.size(); ++i) {
    out[static_cast<std::size_t>(i)] = x[i] + cfg.noise_sigma * noise(rng);
  }
  return out;
}

// A fully labeled basic-expression sample.
Sample draw_basic(const GeneratorConfig& cfg, const Matrix& map, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, kNumEmotions - 1);
  const Emotion e = emotion_at(pick(rng));
  Latent z;
  z.expression = Vector::Zero(static_cast<Index>(kNumEmotions));
  z.expression[static_cast<Index>(index_of(e))] = 1.0;
  std::tie(z.valence, z.arousal) = draw_va(cfg.va_regions[index_of(e)], rng);
  draw_aus(cfg.table.weight_row(e), cfg.au_background_rate, z.au, rng);

  Sample s;
  s.features = render(map, cfg, z, rng);
  s.emotion = static_cast<int>(index_of(e));
  s.au = z.au;
  s.au_mask.fill(1);
  s.has_va = true;
  s.valence = z.valence;
  s.arousal = z.arousal;
  return s;
}

void keep_only(Sample& s, TaskSet pool, const GeneratorConfig& cfg, bool training,
               std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  switch (pool) {
    case TaskSet::kVa:
      s.emotion = kNoLabel;
      s.au.fill(0);
      s.au_mask.fill(0);
      break;
    case TaskSet::kAu: {
      s.emotion = kNoLabel;
      s.has_va = false;
      s.valence = s.arousal = 0.0;
      if (training && cfg.annotated_aus < kNumAus) {
        std::array<std::size_t, kNumAus> idx{};
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::shuffle(idx.begin(), idx.end(), rng);
        s.au_mask.fill(0);
        for (std::size_t i = 0; i < cfg.annotated_aus; ++i) s.au_mask[idx[i]] = 1;
        for (std::size_t k = 0; k < kNumAus; ++k) {
          if (s.au_mask[k] == 0) s.au[k] = 0;
        }
      }
      break;
    }
    case TaskSet::kExpr: {
      s.au.fill(0);
      s.au_mask.fill(0);
      if (!(training && u01(rng) < cfg.expr_va_overlap)) {
        s.has_va = false;
        s.valence = s.arousal = 0.0;
      }
      break;
    }
  }
}

std::vector<Sample> draw_pool(const GeneratorConfig& cfg, const Matrix& map, TaskSet pool,
                              Split split, std::size_t count) {
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::mt19937_64 rng(derive_seed(cfg.seed, kStreamSample,
                                    static_cast<std::uint64_t>(pool) * 4 +
                                        static_cast<std::uint64_t>(split),
                                    i));
    Sample s = draw_basic(cfg, map, rng);
    if (split != Split::kFull) keep_only(s, pool, cfg, split == Split::kTrain, rng);
    out.push_back(std::move(s));
  }
  return out;
}

std::string au_column(std::string_view prefix, std::size_t k) {
  return std::string(prefix) + std::to_string(kCanonicalAuIds[k]);
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint64_t c) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ a);
  h = splitmix64(h ^ b);
  h = splitmix64(h ^ c);
  return h;
}

std::array<VaRegion, kNumEmotions> default_va_regions() {
  std::array<VaRegion, kNumEmotions> r{};
  r[index_of(Emotion::kNeutral)] = {0.0, 0.0, 0.15};
  r[index_of(Emotion::kHappiness)] = {0.6, 0.35, 0.15};
  r[index_of(Emotion::kSadness)] = {-0.55, -0.35, 0.15};
  r[index_of(Emotion::kFear)] = {-0.5, 0.6, 0.15};
  r[index_of(Emotion::kAnger)] = {-0.6, 0.45, 0.15};
  r[index_of(Emotion::kSurprise)] = {0.25, 0.65, 0.15};
  r[index_of(Emotion::kDisgust)] = {-0.55, 0.15, 0.15};
  return r;
}

void GeneratorConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::kValidation, "generator: " + msg); };
  if (n_va < 1 || n_au < 1 || n_expr < 1) fail("every pool needs at least one sample");
  if (feature_dim < 1) fail("feature_dim must be >= 1");
  if (!(noise_sigma >= 0.0)) fail("noise_sigma must be >= 0");
  if (!(au_background_rate >= 0.0 && au_background_rate < 0.5)) {
    fail("au_background_rate must lie in [0, 0.5)");
  }
  if (annotated_aus < 1 || annotated_aus > kNumAus) fail("annotated_aus must lie in [1, 17]");
  if (!(expr_va_overlap >= 0.0 && expr_va_overlap <= 1.0)) fail("expr_va_overlap must lie in [0, 1]");
  for (const auto& r : va_regions) {
    if (!(r.spread >= 0.0)) fail("VA region spread must be >= 0");
  }
}

bool Sample::has_au() const {
  return std::any_of(au_mask.begin(), au_mask.end(), [](std::uint8_t d) { return d != 0; });
}

const DatasetSplit& AffectDatasets::pool(TaskSet s) const {
  switch (s) {
    case TaskSet::kVa: return va;
    case TaskSet::kAu: return au;
    case TaskSet::kExpr: return expr;
  }
  return va;
}

DatasetSplit& AffectDatasets::pool(TaskSet s) {
  return const_cast<DatasetSplit&>(std::as_const(*this).pool(s));
}

std::size_t AffectDatasets::feature_dim() const {
  for (const auto s : kAllTaskSets) {
    const auto& p = pool(s);
    if (!p.train.empty()) return p.train.front().features.size();
    if (!p.test.empty()) return p.test.front().features.size();
  }
  if (!full.empty()) return full.front().features.size();
  return 0;
}

Matrix feature_map(const GeneratorConfig& cfg) {
  std::mt19937_64 rng(derive_seed(cfg.seed, kStreamMap));
  std::normal_distribution<double> n01(0.0, 1.0);
  Matrix map(static_cast<Index>(cfg.feature_dim), static_cast<Index>(kLatentDim));
  const double scale = 1.0 / std::sqrt(static_cast<double>(kLatentDim));
  for (Index j = 0; j < map.cols(); ++j) {
    for (Index i = 0; i < map.rows(); ++i) map(i, j) = scale * n01(rng);
  }
  return map;
}

AffectDatasets generate(const GeneratorConfig& cfg) {
  cfg.validate();
  const Matrix map = feature_map(cfg);
  AffectDatasets out;
  const std::array<std::size_t, 3> sizes{cfg.n_va, cfg.n_au, cfg.n_expr};
  for (const auto s : kAllTaskSets) {
    auto& p = out.pool(s);
    p.train = draw_pool(cfg, map, s, Split::kTrain, sizes[static_cast<std::size_t>(s)]);
    p.test = draw_pool(cfg, map, s, Split::kTest, cfg.n_test);
  }
  out.full = draw_pool(cfg, map, TaskSet::kVa, Split::kFull, cfg.n_full);
  return out;
}

std::vector<Sample> generate_compound(const GeneratorConfig& cfg,
                                      std::span<const CompoundClass> classes,
                                      std::size_t per_class, std::uint64_t stream) {
  cfg.validate();
  const Matrix map = feature_map(cfg);
  std::vector<Sample> out;
  out.reserve(classes.size() * per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    const auto& cls = classes[c];
    for (std::size_t i = 0; i < per_class; ++i) {
      std::mt19937_64 rng(derive_seed(cfg.seed, kStreamCompound, stream, c * per_class + i));
      Latent z;
      z.expression = Vector::Zero(static_cast<Index>(kNumEmotions));
      z.expression[static_cast<Index>(index_of(cls.emo1))] = 0.5;
      z.expression[static_cast<Index>(index_of(cls.emo2))] = 0.5;
      const auto [v1, a1] = draw_va(cfg.va_regions[index_of(cls.emo1)], rng);
      const auto [v2, a2] = draw_va(cfg.va_regions[index_of(cls.emo2)], rng);
      z.valence = 0.5 * (v1 + v2);
      z.arousal = 0.5 * (a1 + a2);
      draw_aus(cls.au_weights, cfg.au_background_rate, z.au, rng);

      Sample s;
      s.features = render(map, cfg, z, rng);
      s.emotion = static_cast<int>(c);
      s.au = z.au;
      s.au_mask.fill(1);
      s.has_va = true;
      s.valence = z.valence;
      s.arousal = z.arousal;
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<AuObservation> au_observations(std::span<const Sample> samples) {
  std::vector<AuObservation> out;
  for (const auto& s : samples) {
    if (s.emotion == kNoLabel || s.emotion >= static_cast<int>(kNumEmotions)) continue;
    if (!std::all_of(s.au_mask.begin(), s.au_mask.end(), [](auto d) { return d != 0; })) continue;
    out.push_back({emotion_at(static_cast<std::size_t>(s.emotion)), s.au});
  }
  return out;
}

std::string dataset_csv(std::span<const Sample> samples) {
  const std::size_t dim = samples.empty() ? 0 : samples.front().features.size();
  std::ostringstream out;
  for (std::size_t i = 0; i < dim; ++i) out << "feature_" << i << ',';
  out << "emo";
  for (std::size_t k = 0; k < kNumAus; ++k) out << ',' << au_column("au_", k);
  for (std::size_t k = 0; k < kNumAus; ++k) out << ',' << au_column("delta_", k);
  out << ",valence,arousal\n";
  for (const auto& s : samples) {
    if (s.features.size() != dim) {
      throw Error(ErrorKind::kInvalidArgument, "dataset_csv: ragged feature dimensions");
    }
    for (const double f : s.features) out << format_double(f) << ',';
    if (s.emotion != kNoLabel) out << s.emotion;
    for (std::size_t k = 0; k < kNumAus; ++k) {
      out << ',';
      if (s.au_mask[k] != 0) out << static_cast<int>(s.au[k]);
    }
    for (std::size_t k = 0; k < kNumAus; ++k) out << ',' << static_cast<int>(s.au_mask[k]);
    out << ',';
    if (s.has_va) out << format_double(s.valence);
    out << ',';
    if (s.has_va) out << format_double(s.arousal);
    out << '\n';
  }
  return out.str();
}

std::vector<Sample> parse_dataset_csv(std::string_view text, std::string_view context,
                                      bool require_delta) {
  const CsvTable t = parse_csv(text, context);
  const std::string ctx(context);
  auto need = [&](const std::string& name) {
    const auto c = t.column(name);
    if (!c) throw Error(ErrorKind::kParse, ctx + ": missing column '" + name + "'");
    return *c;
  };
  std::vector<std::size_t> feature_cols;
  for (std::size_t i = 0;; ++i) {
    const auto c = t.column("feature_" + std::to_string(i));
    if (!c) break;
    feature_cols.push_back(*c);
  }
  const auto emo_col = need("emo");
  std::array<std::size_t, kNumAus> au_cols{};
  std::array<std::optional<std::size_t>, kNumAus> delta_cols{};
  bool any_delta_missing = false;
  for (std::size_t k = 0; k < kNumAus; ++k) {
    au_cols[k] = need(au_column("au_", k));
    delta_cols[k] = t.column(au_column("delta_", k));
    any_delta_missing = any_delta_missing || !delta_cols[k];
  }
  if (require_delta && any_delta_missing) {
    throw Error(ErrorKind::kParse, ctx + ": AU annotations need delta_<id> columns");
  }
  const auto v_col = need("valence");
  const auto a_col = need("arousal");

  auto parse_bit = [&](const std::string& f, const std::string& what) -> std::uint8_t {
    if (f == "0") return 0;
    if (f == "1") return 1;
    throw Error(ErrorKind::kParse, ctx + ": " + what + " must be 0 or 1, got '" + f + "'");
  };

  std::vector<Sample> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    Sample s;
    for (const auto c : feature_cols) s.features.push_back(parse_double(row[c], ctx));
    if (!row[emo_col].empty()) {
      s.emotion = static_cast<int>(parse_double(row[emo_col], ctx));
      if (s.emotion < 0) throw Error(ErrorKind::kParse, ctx + ": negative expression label");
    }
    for (std::size_t k = 0; k < kNumAus; ++k) {
      const auto& f = row[au_cols[k]];
      if (delta_cols[k]) {
        s.au_mask[k] = parse_bit(row[*delta_cols[k]], "delta");
      } else {
        if (!f.empty()) {
          throw Error(ErrorKind::kParse,
                      ctx + ": AU value without delta column " + au_column("delta_", k));
        }
        s.au_mask[k] = 0;
      }
      if (s.au_mask[k] != 0) {
        s.au[k] = parse_bit(f, "AU value");
      } else if (!f.empty()) {
        throw Error(ErrorKind::kParse, ctx + ": AU value present where delta is 0");
      }
    }
    const bool v_empty = row[v_col].empty();
    const bool a_empty = row[a_col].empty();
    if (v_empty != a_empty) throw Error(ErrorKind::kParse, ctx + ": valence without arousal");
    if (!v_empty) {
      s.has_va = true;
      s.valence = parse_double(row[v_col], ctx);
      s.arousal = parse_double(row[a_col], ctx);
    }
    out.push_back(std::move(s));
  }
  return out;
}

void save_dataset(std::span<const Sample> samples, const std::filesystem::path& path) {
  write_text_file(path, dataset_csv(samples));
}

std::vector<Sample> load_dataset(const std::filesystem::path& path, bool require_delta) {
  return parse_dataset_csv(read_text_file(path), path.string(), require_delta);
}

void save_datasets(const AffectDatasets& data, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  for (const auto s : kAllTaskSets) {
    const std::string name(task_set_name(s));
    save_dataset(data.pool(s).train, dir / (name + "_train.csv"));
    save_dataset(data.pool(s).test, dir / (name + "_test.csv"));
  }
  if (!data.full.empty()) save_dataset(data.full, dir / "full.csv");
}

AffectDatasets load_datasets(const std::filesystem::path& dir) {
  AffectDatasets out;
  for (const auto s : kAllTaskSets) {
    const std::string name(task_set_name(s));
    const bool au = s == TaskSet::kAu;
    out.pool(s).train = load_dataset(dir / (name + "_train.csv"), au);
    out.pool(s).test = load_dataset(dir / (name + "_test.csv"), au);
  }
  if (std::filesystem::exists(dir / "full.csv")) out.full = load_dataset(dir / "full.csv", true);
  return out;
}

std::size_t BatchSchedule::batch_rows() const {
  return batch_sizes[0] + batch_sizes[1] + batch_sizes[2];
}

BatchSchedule make_schedule(std::array<std::size_t, 3> pool_sizes, std::size_t iterations) {
  if (iterations == 0) throw Error(ErrorKind::kInvalidArgument, "schedule: iterations must be >= 1");
  for (const auto n : pool_sizes) {
    if (n < 1) throw Error(ErrorKind::kInvalidArgument, "schedule: every pool needs >= 1 sample");
  }
  const auto smallest = *std::min_element(pool_sizes.begin(), pool_sizes.end());
  if (iterations > smallest) {
    throw Error(ErrorKind::kInvalidArgument,
                "schedule: " + std::to_string(iterations) +
                    " iterations exceed the smallest pool (" + std::to_string(smallest) + ")");
  }
  BatchSchedule s;
  s.iterations = iterations;
  for (std::size_t i = 0; i < 3; ++i) s.batch_sizes[i] = pool_sizes[i] / iterations;
  return s;
}

LabeledBatch to_batch(std::span<const Sample* const> samples, std::span<const TaskSet> origin) {
  if (samples.size() != origin.size()) {
    throw Error(ErrorKind::kInvalidArgument, "to_batch: origin count mismatch");
  }
  const std::size_t dim = samples.empty() ? 0 : samples.front()->features.size();
  LabeledBatch b = LabeledBatch::with_rows(samples.size(), dim);
  for (std::size_t r = 0; r < samples.size(); ++r) {
    const Sample& s = *samples[r];
    const auto ri = static_cast<Index>(r);
    if (s.features.size() != dim) {
      throw Error(ErrorKind::kInvalidArgument, "to_batch: ragged feature dimensions");
    }
    for (std::size_t i = 0; i < dim; ++i) b.features(ri, static_cast<Index>(i)) = s.features[i];
    b.emo_labels[r] = s.emotion;
    for (std::size_t k = 0; k < kNumAus; ++k) {
      const auto ki = static_cast<Index>(k);
      b.au_mask(ri, ki) = s.au_mask[k];
      b.au_labels(ri, ki) = s.au_mask[k] != 0 ? s.au[k] : 0.0;
    }
    if (s.has_va) {
      b.has_va[r] = 1;
      b.va_labels(ri, 0) = s.valence;
      b.va_labels(ri, 1) = s.arousal;
    }
    b.origin[r] = origin[r];
  }
  return b;
}

LabeledBatch to_batch(std::span<const Sample> samples, TaskSet origin) {
  std::vector<const Sample*> ptrs;
  ptrs.reserve(samples.size());
  for (const auto& s : samples) ptrs.push_back(&s);
  const std::vector<TaskSet> origins(samples.size(), origin);
  return to_batch(ptrs, origins);
}

EpochSampler::EpochSampler(const BatchSchedule& schedule, const AffectDatasets& data,
                           std::uint64_t epoch_seed, std::array<bool, 3> active)
    : schedule_(schedule), data_(&data), active_(active) {
  std::mt19937_64 rng(epoch_seed);
  for (const auto s : kAllTaskSets) {
    const auto i = static_cast<std::size_t>(s);
    const auto& pool = data.pool(s).train;
    if (active_[i] && schedule_.used(s) > pool.size()) {
      throw Error(ErrorKind::kInvalidArgument,
                  "sampler: schedule needs " + std::to_string(schedule_.used(s)) + " " +
                      std::string(task_set_name(s)) + " samples, pool has " +
                      std::to_string(pool.size()));
    }
    order_[i].resize(pool.size());
    std::iota(order_[i].begin(), order_[i].end(), std::size_t{0});
    std::shuffle(order_[i].begin(), order_[i].end(), rng);
  }
}

LabeledBatch EpochSampler::next_batch() {
  if (exhausted()) throw Error(ErrorKind::kState, "sampler: epoch exhausted");
  std::vector<const Sample*> rows;
  std::vector<TaskSet> origin;
  last_rows_.clear();
  for (const auto s : kAllTaskSets) {
    const auto i = static_cast<std::size_t>(s);
    if (!active_[i]) continue;
    const auto b = schedule_.batch_sizes[i];
    const auto& pool = data_->pool(s).train;
    for (std::size_t j = 0; j < b; ++j) {
      const auto idx = order_[i][iteration_ * b + j];
      rows.push_back(&pool[idx]);
      origin.push_back(s);
      last_rows_.emplace_back(s, idx);
    }
  }
  ++iteration_;
  return to_batch(rows, origin);
}

}  // namespace affect
