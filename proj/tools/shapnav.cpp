#include <malloc.h>

#include "shapnav/cli/commands.hpp"

int main(int argc, char** argv) {
  // Keep large training buffers out of mmap; repeated map/unmap dominated step time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
  return shapnav::cli::run_cli(argc, argv);
}
