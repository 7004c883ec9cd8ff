#pragma once

#include <string>

#include "salcal/field.hpp"

namespace salcal {

// Binary PGM (P5), maxval up to 65535. Values are divided by maxval. File
// row 0 becomes field row 0. The extent is taken from the sidecar when one
// exists, otherwise the default grid's extent is attached when the size
// matches, else unit spacing from the origin.
ScalarField read_pgm(const std::string& path);
// 8-bit display image, min-max scaled. Not a data format.
void write_pgm_display(const std::string& path, const ScalarField& field);
// Writes values in [0, 1] at 16 bits.
void write_pgm16(const std::string& path, const ScalarField& field);

// height rows of width comma-separated reals.
ScalarField read_csv_grid(const std::string& path);
// 17 significant digits, plus "<path>.hdr" sidecar.
void write_csv_grid(const std::string& path, const ScalarField& field);

std::string sidecar_path(const std::string& path);
void write_sidecar(const std::string& path, const GridSpec& spec);
// Returns false if no sidecar exists.
bool read_sidecar(const std::string& path, GridSpec& spec);

// Dispatches on the PGM magic / file extension.
ScalarField read_field(const std::string& path);

// Writes to a temp file in the same directory and renames.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace salcal
