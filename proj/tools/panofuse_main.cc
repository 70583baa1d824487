#include "panofuse/cli.h"

int main(int argc, char** argv) { return panofuse::cli::Main(argc, argv); }
