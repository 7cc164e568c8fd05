package util;

public class Identity {

    /** Returns its argument unchanged. */
    public static <T> T id(T x) {
        return x;
    }
}
