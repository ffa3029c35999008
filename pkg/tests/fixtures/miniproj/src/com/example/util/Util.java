package com.example.util;

import java.util.ArrayList;
import java.util.List;

/* Shared helpers.  The header() method is an exact copy of the one in
   Report.java so duplicate collapsing has something to do. */
public final class Util {
    static String header() {
        // identical to Report.header once comments are stripped
        return "== results ==";
    }

    static <T> List<T> singleton(T item) {
        List<T> box = new ArrayList<T>();
        box.add(item);
        return box;
    }

    static int f(int x) {
        return x * 2;
    }

    static int f(int x, int y) {
        return f(x) + y;
    }

    static void demo(List<String> rows) {
        int total = f(3, 4);
        java.util.function.Supplier<Integer> lazy = () -> Integer.valueOf(total);
        lazy.get();
        new com.example.app.Engine().sortResults(new ArrayList<>());
    }
}
