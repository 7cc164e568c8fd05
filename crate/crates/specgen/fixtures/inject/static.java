package util;

public class MathOps {

    /** Returns the absolute value of x. */
    public static int abs(int x) {
        if (x < 0) {
            return -x;
        }
        return x;
    }
}
