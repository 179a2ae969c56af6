// Writes a synthetic embedding file for a corpus. The generator mimics the
// structure of text-encoder outputs that matters for channel selection: a few
// high-magnitude channels shared by every description, channels carrying
// category and category-group identity, channels that follow the phrasing
// of the description rather than its category, and per-channel scales.
#include <cmath>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "langsup/corpus.hpp"
#include "langsup/error.hpp"
#include "langsup/rng.hpp"

namespace {

using namespace langsup;

struct Params {
  std::size_t dim = 512;
  std::size_t common_channels = 24;
  std::size_t semantic_channels = 160;
  double common_level = 4.0;
  double category_level = 1.0;
  double group_level = 0.9;
  double phrasing_level = 0.9;
  double noise = 1.2;
  double scale_spread = 0.35;  // log-normal sigma of per-channel scales
  std::uint64_t seed = 2024;
};

// Categories whose descriptions overlap (furniture for sitting, flat work
// surfaces, bathroom fixtures...). Anything unlisted forms its own group.
const std::map<std::string, int>& groups() {
  static const std::map<std::string, int> g = {
      {"chair", 0},         {"sofa", 0},           {"table", 1},   {"desk", 1},        {"counter", 1},
      {"curtain", 2},       {"shower curtain", 2}, {"window", 2},  {"toilet", 3},      {"sink", 3},
      {"bathtub", 3},       {"cabinet", 4},        {"bookshelf", 4}, {"refrigerator", 4}, {"otherfurniture", 4},
      {"wall", 5},          {"floor", 5},          {"door", 5},    {"picture", 5},
  };
  return g;
}

Vector gaussian(Rng& rng, std::size_t n, double level) {
  Vector v(n);
  for (auto& x : v) x = level * rng.normal();
  return v;
}

EmbeddingSet generate(const Corpus& corpus, const Params& p) {
  Rng rng(derive_seed(p.seed, "fixture.layout"));
  // Channel roles: 0 common, 1 semantic, 2 phrasing-only.
  std::vector<int> role(p.dim, 2);
  std::vector<std::size_t> perm(p.dim);
  for (std::size_t i = 0; i < p.dim; ++i) perm[i] = i;
  for (std::size_t i = p.dim - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_index(i + 1)]);
  for (std::size_t i = 0; i < p.common_channels; ++i) role[perm[i]] = 0;
  for (std::size_t i = 0; i < p.semantic_channels; ++i) role[perm[p.common_channels + i]] = 1;

  Vector scale(p.dim), common(p.dim);
  for (std::size_t c = 0; c < p.dim; ++c) {
    scale[c] = std::exp(p.scale_spread * rng.normal());
    common[c] = role[c] == 0 ? p.common_level * (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.75, 1.5) : 0.0;
  }

  std::map<int, Vector> group_signal;
  int next_group = 100;
  std::size_t max_rows = 0;
  for (const auto& c : corpus.categories) max_rows = std::max(max_rows, c.descriptions.size());
  // Description i of every category shares a phrasing component (same
  // template or perspective position).
  std::vector<Vector> phrasing;
  for (std::size_t i = 0; i < max_rows; ++i) phrasing.push_back(gaussian(rng, p.dim, p.phrasing_level));

  std::vector<Matrix> blocks;
  Rng noise_rng(derive_seed(p.seed, "fixture.noise"));
  for (const auto& cat : corpus.categories) {
    auto it = groups().find(cat.name);
    const int g = it == groups().end() ? next_group++ : it->second;
    if (!group_signal.count(g)) group_signal[g] = gaussian(rng, p.dim, p.group_level);
    const Vector identity = gaussian(rng, p.dim, p.category_level);
    Matrix block(cat.descriptions.size(), p.dim);
    for (std::size_t i = 0; i < block.rows(); ++i) {
      for (std::size_t c = 0; c < p.dim; ++c) {
        double v = common[c] + p.noise * noise_rng.normal();
        if (role[c] == 1) v += identity[c] + group_signal[g][c];
        if (role[c] != 0) v += phrasing[i][c];
        block(i, c) = scale[c] * v;
      }
    }
    blocks.push_back(std::move(block));
  }
  // Rows stay unnormalized, as an encoder would emit them; loading normalizes.
  return EmbeddingSet(p.dim, corpus.names(), std::move(blocks));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic embedding fixture generator"};
  std::string corpus_path, out_path;
  Params p;
  app.add_option("--corpus", corpus_path)->required();
  app.add_option("--out", out_path)->required();
  app.add_option("--dim", p.dim);
  app.add_option("--seed", p.seed);
  app.add_option("--common-channels", p.common_channels);
  app.add_option("--semantic-channels", p.semantic_channels);
  app.add_option("--common-level", p.common_level);
  app.add_option("--category-level", p.category_level);
  app.add_option("--group-level", p.group_level);
  app.add_option("--phrasing-level", p.phrasing_level);
  app.add_option("--noise", p.noise);
  CLI11_PARSE(app, argc, argv);

  try {
    if (p.common_channels + p.semantic_channels > p.dim) throw_validation("channel roles exceed --dim");
    const Corpus corpus = load_corpus(corpus_path);
    const EmbeddingSet es = generate(corpus, p);
    save_embeddings(es, out_path, EmbeddingDtype::kF32,
                    {{"generator", "make_fixture"}, {"seed", std::to_string(p.seed)}});
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
  return 0;
}
