package util;

public class Formatter {

    public String format(int value) {
        return Integer.toString(value);
    }

    public String format(String value) {
        return "[" + value + "]";
    }
}
