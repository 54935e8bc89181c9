// Copyright 2026 The treeinfer Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Scores a dataset with a saved model and prints one score per line.
//
//   score_model MODEL DATA [STRATEGY [BATCH]]
//
// STRATEGY defaults to predicated. vpredicated needs BATCH.

#include <cstdio>
#include <cstdlib>
#include <string>

#include "treeinfer.hpp"

int main(int argc, char** argv) {
  if (argc < 3 || argc > 5) {
    std::fprintf(stderr, "usage: %s MODEL DATA [STRATEGY [BATCH]]\n", argv[0]);
    return 1;
  }
  try {
    const treeinfer::Ensemble model = treeinfer::load_model(argv[1]);
    const treeinfer::Dataset data = treeinfer::load_dataset(argv[2]);
    const std::string name = argc > 3 ? argv[3] : "predicated";
    const auto kind = treeinfer::parse_strategy(name);
    if (!kind) {
      std::fprintf(stderr, "unknown strategy %s\n", name.c_str());
      return 1;
    }
    std::optional<std::size_t> batch;
    if (argc > 4) batch = std::strtoull(argv[4], nullptr, 10);

    const treeinfer::Evaluator ev =
        *kind == treeinfer::StrategyKind::kGenerated
            ? treeinfer::build_generated(model, std::filesystem::temp_directory_path())
            : treeinfer::build(model, *kind, batch);
    for (double s : ev.predict_batch(data)) std::printf("%.17g\n", s);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
