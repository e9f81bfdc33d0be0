#include "coag/cli.hpp"

int main(int argc, char** argv) {
  return coag::run_command({argv + 1, argv + argc});
}
