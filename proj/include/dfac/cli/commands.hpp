#pragma once

namespace dfac::cli {

/// Entry point of the `dfac` executable: train, eval, export, verify.
int run(int argc, char** argv);

}  // namespace dfac::cli
