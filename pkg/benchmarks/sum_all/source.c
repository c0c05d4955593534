int sum_all(int rows, int cols, int M[rows][cols], int* total) {
    *total = 0;
    for (int i = 0; i < rows; i++)
        for (int j = 0; j < cols; j++)
            *total += M[i][j];
    return *total;
}
