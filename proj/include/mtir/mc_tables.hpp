#ifndef MTIR_MC_TABLES_HPP
#define MTIR_MC_TABLES_HPP

namespace mtir::mc {

extern const int kEdgeTable[256];
extern const int kTriTable[256][16];

}  // namespace mtir::mc

#endif
