void row_sum(int rows, int cols, double** A, double* out) {
    for (int r = 0; r < rows; r++) {
        out[r] = 0;
        for (int c = 0; c < cols; c++)
            out[r] += A[r][c];
    }
}
