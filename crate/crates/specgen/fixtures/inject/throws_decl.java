package io;

import java.io.IOException;

public class Reader {

    /** Reads a single line. */
    public String readLine(int limit) throws IOException, IllegalArgumentException {
        if (limit < 0) {
            throw new IllegalArgumentException("limit");
        }
        return "line";
    }
}
