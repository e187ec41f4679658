#pragma once

namespace epiforge::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kCalibration = 3,
  kTriangulation = 4,
  kEvaluation = 5,
  kClustering = 6,
};

int run(int argc, char** argv);

}  // namespace epiforge::cli
